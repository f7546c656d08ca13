//! Reinforcement-learning attacks that push a chosen document up the ranking
//! of a black-box neural text ranker through word, phrase and sentence
//! perturbations chosen by two cooperating policies.

pub mod agents;
pub mod attacks;
pub mod bench;
pub mod config;
pub mod corpus;
pub mod env;
pub mod error;
pub mod eval;
pub mod linalg;
pub mod pipeline;
pub mod ranker;

pub use error::{Error, Result};
