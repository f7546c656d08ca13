//! REINFORCE for both agents with discounted reward-to-go.
//!
//! For the objective `J = E[Σ_t γ^(t-1) r_t]` the step-`t` selection term is
//! weighted by `γ^(t-1) (R_t - b)`, which keeps the estimator unbiased for
//! `∇J`. The label term uses `R_1 - b`. A selection that was rejected for
//! overflowing the budget ends the episode with no reward and still
//! contributes its log-probability with return 0.

use serde::{Deserialize, Serialize};

use super::episode::Trajectory;
use crate::agents::{log_prob_grad, Policies};
use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum OptimizerKind {
    Sgd,
    Adam,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ReinforceConfig {
    pub learning_rate: f64,
    pub optimizer: OptimizerKind,
    /// Subtract a moving-average baseline from returns.
    pub baseline: bool,
    pub baseline_decay: f64,
    /// Rescale the batch gradient to at most this norm; 0 disables.
    pub max_grad_norm: f64,
}

impl Default for ReinforceConfig {
    fn default() -> Self {
        ReinforceConfig {
            learning_rate: 0.01,
            optimizer: OptimizerKind::Adam,
            baseline: true,
            baseline_decay: 0.9,
            max_grad_norm: 10.0,
        }
    }
}

/// Scalar moving average of episode returns.
#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct Baseline {
    pub value: f64,
    pub initialized: bool,
}

impl Baseline {
    pub fn get(&self) -> f64 {
        if self.initialized {
            self.value
        } else {
            0.0
        }
    }

    pub fn observe(&mut self, mean_return: f64, decay: f64) {
        if self.initialized {
            self.value = decay * self.value + (1.0 - decay) * mean_return;
        } else {
            self.value = mean_return;
            self.initialized = true;
        }
    }
}

/// Label weight and one weight per recorded selection.
pub fn trajectory_weights(traj: &Trajectory, gamma: f64, baseline: f64) -> (f64, Vec<f64>) {
    let returns = traj.returns(gamma);
    let label = returns.first().copied().unwrap_or(0.0) - baseline;
    let mut weights: Vec<f64> = returns
        .iter()
        .enumerate()
        .map(|(t, r)| gamma.powi(t as i32) * (r - baseline))
        .collect();
    if traj.rejected.is_some() {
        weights.push(gamma.powi(returns.len() as i32) * -baseline);
    }
    (label, weights)
}

/// `(1/U) Σ_u [ (R_1 - b) ∇log p(labels) + Σ_t γ^(t-1) (R_t - b) ∇log π_t ]`.
pub fn estimate_gradient(pols: &Policies, batch: &[Trajectory], gamma: f64, baseline: f64) -> Result<Policies> {
    if batch.is_empty() {
        return Err(Error::InvalidParameter("empty trajectory batch".into()));
    }
    let mut grad = pols.zeros_like();
    for traj in batch {
        let (lw, sw) = trajectory_weights(traj, gamma, baseline);
        if sw.len() != traj.record.steps.len() {
            return Err(Error::ShapeMismatch("trajectory record does not match its steps".into()));
        }
        let g = log_prob_grad(pols, &traj.record, lw, &sw)?;
        grad.add_scaled(&g, 1.0 / batch.len() as f64);
    }
    Ok(grad)
}

#[derive(Clone, Debug, PartialEq)]
pub struct Optimizer {
    kind: OptimizerKind,
    lr: f64,
    m: Vec<f64>,
    v: Vec<f64>,
    t: i32,
}

impl Optimizer {
    pub fn new(kind: OptimizerKind, lr: f64, n_params: usize) -> Self {
        Optimizer {
            kind,
            lr,
            m: vec![0.0; n_params],
            v: vec![0.0; n_params],
            t: 0,
        }
    }

    /// Gradient ascent step.
    pub fn ascend(&mut self, pols: &mut Policies, grad: &Policies) {
        match self.kind {
            OptimizerKind::Sgd => pols.add_scaled(grad, self.lr),
            OptimizerKind::Adam => {
                const B1: f64 = 0.9;
                const B2: f64 = 0.999;
                const EPS: f64 = 1e-8;
                self.t += 1;
                let g = grad.to_flat();
                let mut p = pols.to_flat();
                let c1 = 1.0 - B1.powi(self.t);
                let c2 = 1.0 - B2.powi(self.t);
                for i in 0..p.len() {
                    self.m[i] = B1 * self.m[i] + (1.0 - B1) * g[i];
                    self.v[i] = B2 * self.v[i] + (1.0 - B2) * g[i] * g[i];
                    p[i] += self.lr * (self.m[i] / c1) / ((self.v[i] / c2).sqrt() + EPS);
                }
                pols.set_flat(&p);
            }
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct UpdateStats {
    pub mean_return: f64,
    pub baseline: f64,
    pub grad_norm: f64,
}

/// One joint ascent step for both agents from a batch of trajectories.
pub fn reinforce_update(
    pols: &mut Policies,
    opt: &mut Optimizer,
    baseline: &mut Baseline,
    batch: &[Trajectory],
    cfg: &ReinforceConfig,
    gamma: f64,
) -> Result<UpdateStats> {
    let b = if cfg.baseline { baseline.get() } else { 0.0 };
    let mut grad = estimate_gradient(pols, batch, gamma, b)?;
    let grad_norm = grad.sq_norm().sqrt();
    if cfg.max_grad_norm > 0.0 && grad_norm > cfg.max_grad_norm {
        let scale = cfg.max_grad_norm / grad_norm;
        let mut scaled = grad.zeros_like();
        scaled.add_scaled(&grad, scale);
        grad = scaled;
    }
    opt.ascend(pols, &grad);
    let mean_return = batch.iter().map(|t| t.total_return(gamma)).sum::<f64>() / batch.len() as f64;
    if cfg.baseline {
        baseline.observe(mean_return, cfg.baseline_decay);
    }
    Ok(UpdateStats {
        mean_return,
        baseline: b,
        grad_norm,
    })
}
