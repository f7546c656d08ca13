//! Target (black-box) and surrogate rankers, pairwise training and
//! distillation from observed rankings.

mod checkpoint;
mod distill;
mod model;
mod target;
mod train;

use std::collections::HashMap;

pub(crate) use checkpoint::{push_mlp, take_mlp};
pub use checkpoint::{config_hash, Checkpoint, NamedArray, CHECKPOINT_FORMAT, CHECKPOINT_VERSION};
pub use distill::{distill_surrogate, kendall_tau, ranking_agreement, DistillConfig, Distilled};
pub use model::{NeuralRanker, QueryScorer, RankerConfig, SurrogateRanker, DEFAULT_DIM, DEFAULT_HIDDEN, EMBEDDING_INIT_STD};
pub use target::{TargetConfig, TargetRanker};
pub use train::{pairwise_set_loss, train_pairwise, PairSet, TrainConfig};

/// Per-position gradient vectors of a document, `m x l`.
#[derive(Clone, Debug, PartialEq)]
pub struct GradientMatrix {
    dim: usize,
    len: usize,
    data: Vec<f64>,
}

impl GradientMatrix {
    pub fn new(dim: usize, len: usize, data: Vec<f64>) -> Self {
        assert_eq!(data.len(), dim * len, "gradient matrix shape");
        GradientMatrix { dim, len, data }
    }

    pub(crate) fn repeat(row: &[f64], len: usize) -> Self {
        let mut data = Vec::with_capacity(row.len() * len);
        for _ in 0..len {
            data.extend_from_slice(row);
        }
        GradientMatrix {
            dim: row.len(),
            len,
            data,
        }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    /// Document length `l`.
    pub fn len(&self) -> usize {
        self.len
    }

    pub fn is_empty(&self) -> bool {
        self.len == 0
    }

    pub fn position(&self, i: usize) -> &[f64] {
        &self.data[i * self.dim..(i + 1) * self.dim]
    }

    /// Position-major storage: position `i` occupies `data[i*m..(i+1)*m]`.
    pub fn data(&self) -> &[f64] {
        &self.data
    }
}

/// Ordered result list for one query; positions are 1-based.
#[derive(Clone, Debug, PartialEq)]
pub struct RankedList {
    pub query_id: String,
    ids: Vec<String>,
    positions: HashMap<String, usize>,
}

impl RankedList {
    pub fn new(query_id: impl Into<String>, ids: Vec<String>) -> Self {
        let positions = ids.iter().enumerate().map(|(i, id)| (id.clone(), i + 1)).collect();
        RankedList {
            query_id: query_id.into(),
            ids,
            positions,
        }
    }

    pub fn ids(&self) -> &[String] {
        &self.ids
    }

    /// 1-based rank of `doc_id`, if present.
    pub fn position(&self, doc_id: &str) -> Option<usize> {
        self.positions.get(doc_id).copied()
    }

    /// Document at 1-based rank `rank`.
    pub fn at(&self, rank: usize) -> Option<&str> {
        rank.checked_sub(1).and_then(|i| self.ids.get(i)).map(String::as_str)
    }

    pub fn len(&self) -> usize {
        self.ids.len()
    }

    pub fn is_empty(&self) -> bool {
        self.ids.is_empty()
    }
}
