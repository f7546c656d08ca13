//! The attack MDP: state transitions, shaped rewards, naturalness scoring,
//! episode rollout and REINFORCE training of both agents.

mod episode;
mod oracle;
mod reinforce;
mod reward;
mod state;
mod train;

pub use episode::{Choice, EpisodeInput, Environment, Prepared, Rejection, Step, Termination, Trajectory};
pub use oracle::{ExternalConfig, ExternalOracle, LocalOracle, NaturalnessOracle};
pub use reinforce::{
    estimate_gradient, reinforce_update, trajectory_weights, Baseline, Optimizer, OptimizerKind, ReinforceConfig,
    UpdateStats,
};
pub use reward::{returns_to_go, step_reward, RewardConfig, ScoreScale, DEFAULT_BETA, DEFAULT_BUDGET, DEFAULT_GAMMA, DEFAULT_XI};
pub use state::{Applied, ApplyOutcome, AttackState, Pending};
pub use train::{episode_rng, run_batch, train, AttackerConfig, EpochLog};
