use std::io::Write;

use rand::seq::SliceRandom;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::episode::{EpisodeInput, Environment, Trajectory};
use super::reinforce::{reinforce_update, Baseline, Optimizer, ReinforceConfig};
use crate::agents::{DecisionMode, Policies};
use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct AttackerConfig {
    pub epochs: usize,
    /// Episodes per update (`U`).
    pub batch_size: usize,
    pub seed: u64,
    pub reinforce: ReinforceConfig,
}

impl Default for AttackerConfig {
    fn default() -> Self {
        AttackerConfig {
            epochs: 40,
            batch_size: 8,
            seed: 4004,
            reinforce: ReinforceConfig::default(),
        }
    }
}

/// One line of the training log.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EpochLog {
    pub epoch: usize,
    /// `train`, or `test` for the final frozen pass.
    pub phase: String,
    pub mean_return: f64,
    pub mean_steps: f64,
    pub mean_budget: f64,
    pub mean_score_gain: f64,
    pub oracle: String,
}

/// Independent, reproducible stream for one episode.
pub fn episode_rng(seed: u64, epoch: usize, index: usize) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(((epoch as u64) << 32) | index as u64);
    rng
}

/// Runs one episode per input in parallel; results keep input order.
pub fn run_batch(
    env: &Environment,
    pols: &Policies,
    inputs: &[&EpisodeInput],
    mode: DecisionMode,
    seed: u64,
    epoch: usize,
    offset: usize,
) -> Result<Vec<Trajectory>> {
    inputs
        .par_iter()
        .enumerate()
        .map(|(i, input)| env.run_episode(pols, input, mode, &mut episode_rng(seed, epoch, offset + i)))
        .collect()
}

fn summarize(epoch: usize, phase: &str, trajs: &[Trajectory], gamma: f64, oracle: &str) -> EpochLog {
    let n = trajs.len().max(1) as f64;
    EpochLog {
        epoch,
        phase: phase.into(),
        mean_return: trajs.iter().map(|t| t.total_return(gamma)).sum::<f64>() / n,
        mean_steps: trajs.iter().map(|t| t.len() as f64).sum::<f64>() / n,
        mean_budget: trajs.iter().map(|t| t.budget_used() as f64).sum::<f64>() / n,
        mean_score_gain: trajs.iter().map(|t| t.final_score - t.initial_score).sum::<f64>() / n,
        oracle: oracle.into(),
    }
}

/// Trains both agents with REINFORCE over shuffled targets, then runs one
/// frozen greedy pass as the test phase. Each log record is also written as
/// a JSON line to `log` when given.
pub fn train(
    env: &Environment,
    pols: &mut Policies,
    targets: &[EpisodeInput],
    cfg: &AttackerConfig,
    mut log: Option<&mut dyn Write>,
) -> Result<Vec<EpochLog>> {
    if targets.is_empty() {
        return Err(Error::InvalidParameter("no training targets".into()));
    }
    if cfg.batch_size == 0 {
        return Err(Error::InvalidParameter("batch size must be positive".into()));
    }
    let gamma = env.reward.gamma;
    let mut opt = Optimizer::new(cfg.reinforce.optimizer, cfg.reinforce.learning_rate, pols.num_params());
    let mut baseline = Baseline::default();
    let mut logs = Vec::with_capacity(cfg.epochs + 1);
    let mut emit = |entry: EpochLog, logs: &mut Vec<EpochLog>| -> Result<()> {
        if let Some(w) = log.as_deref_mut() {
            let line = serde_json::to_string(&entry)?;
            writeln!(w, "{line}").map_err(|e| Error::io("training log", e))?;
        }
        logs.push(entry);
        Ok(())
    };
    for epoch in 0..cfg.epochs {
        let mut order: Vec<usize> = (0..targets.len()).collect();
        order.shuffle(&mut episode_rng(cfg.seed, epoch, usize::MAX >> 32));
        let mut epoch_trajs = Vec::with_capacity(targets.len());
        for (b, chunk) in order.chunks(cfg.batch_size).enumerate() {
            let inputs: Vec<&EpisodeInput> = chunk.iter().map(|&i| &targets[i]).collect();
            let batch = run_batch(env, pols, &inputs, DecisionMode::Sample, cfg.seed, epoch, b * cfg.batch_size)?;
            reinforce_update(pols, &mut opt, &mut baseline, &batch, &cfg.reinforce, gamma)?;
            epoch_trajs.extend(batch);
        }
        emit(summarize(epoch, "train", &epoch_trajs, gamma, env.oracle.mode()), &mut logs)?;
    }
    let all: Vec<&EpisodeInput> = targets.iter().collect();
    let test = run_batch(env, pols, &all, DecisionMode::Argmax, cfg.seed, cfg.epochs, 0)?;
    emit(summarize(cfg.epochs, "test", &test, gamma, env.oracle.mode()), &mut logs)?;
    Ok(logs)
}
