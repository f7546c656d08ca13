use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub const DEFAULT_XI: f64 = 1.0;
pub const DEFAULT_BETA: f64 = 0.2;
pub const DEFAULT_GAMMA: f64 = 0.9;
pub const DEFAULT_BUDGET: usize = 25;

/// Units of the surrogate score inside the reward.
///
/// The surrogate mean-pools token embeddings, so one edited token moves its
/// score by roughly `1/l` of what it would move a contextual ranker's.
/// `DocLength` multiplies scores by the original document length `l`, which
/// puts the attack term on the scale of a per-token effect and keeps it
/// commensurate with the `[0, 2]` naturalness term.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub enum ScoreScale {
    Raw,
    #[default]
    DocLength,
}

impl ScoreScale {
    pub fn factor(self, doc_len: usize) -> f64 {
        match self {
            ScoreScale::Raw => 1.0,
            ScoreScale::DocLength => doc_len as f64,
        }
    }
}

impl std::str::FromStr for ScoreScale {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "raw" => Ok(ScoreScale::Raw),
            "doc-length" => Ok(ScoreScale::DocLength),
            _ => Err(Error::BadValue {
                key: "score_scale".into(),
                value: s.into(),
            }),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct RewardConfig {
    /// Penalty for a step that lowers the surrogate score.
    pub xi: f64,
    /// Weight of the naturalness term.
    pub beta: f64,
    pub gamma: f64,
    /// Term budget ε: total replacement tokens per episode.
    pub budget: usize,
    /// Optional hard floor on similarity; a step below it is rejected.
    pub sim_floor: Option<f64>,
    pub score_scale: ScoreScale,
}

impl Default for RewardConfig {
    fn default() -> Self {
        RewardConfig {
            xi: DEFAULT_XI,
            beta: DEFAULT_BETA,
            gamma: DEFAULT_GAMMA,
            budget: DEFAULT_BUDGET,
            sim_floor: None,
            score_scale: ScoreScale::default(),
        }
    }
}

impl RewardConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.xi > 0.0 && self.xi.is_finite()) {
            return Err(Error::InvalidParameter(format!("xi must be > 0, got {}", self.xi)));
        }
        if !(self.beta >= 0.0 && self.beta.is_finite()) {
            return Err(Error::InvalidParameter(format!("beta must be >= 0, got {}", self.beta)));
        }
        if !(0.0..1.0).contains(&self.gamma) {
            return Err(Error::InvalidParameter(format!("gamma must lie in [0, 1), got {}", self.gamma)));
        }
        if self.budget == 0 {
            return Err(Error::InvalidParameter("budget must be at least 1".into()));
        }
        if let Some(f) = self.sim_floor {
            if !(0.0..=1.0).contains(&f) {
                return Err(Error::InvalidParameter(format!("similarity floor {f} outside [0, 1]")));
            }
        }
        Ok(())
    }
}

/// `-ξ` when the surrogate score strictly drops, otherwise
/// `(f_cur - f_prev) / |p| + β (r_sim + r_flu)`.
pub fn step_reward(cfg: &RewardConfig, f_prev: f64, f_cur: f64, plen: usize, r_sim: f64, r_flu: f64) -> Result<f64> {
    if plen == 0 {
        return Err(Error::InvalidParameter("perturbation length must be positive".into()));
    }
    if f_cur < f_prev {
        return Ok(-cfg.xi);
    }
    Ok((f_cur - f_prev) / plen as f64 + cfg.beta * (r_sim + r_flu))
}

/// Discounted reward-to-go `R_t = Σ_{t' >= t} γ^{t'-t} r_{t'}`.
pub fn returns_to_go(rewards: &[f64], gamma: f64) -> Vec<f64> {
    let mut out = vec![0.0; rewards.len()];
    let mut acc = 0.0;
    for (t, &r) in rewards.iter().enumerate().rev() {
        acc = r + gamma * acc;
        out[t] = acc;
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn worked_examples() {
        let cfg = RewardConfig::default();
        assert_eq!(step_reward(&cfg, 0.5, 0.4, 1, 1.0, 1.0).unwrap(), -1.0);
        assert_eq!(step_reward(&cfg, 0.3, 0.3, 1, 0.0, 0.0).unwrap(), 0.0);
        let r = step_reward(&cfg, 0.2, 0.5, 3, 1.0, 1.0).unwrap();
        assert!((r - 0.5).abs() < 1e-12);
        assert!(step_reward(&cfg, 0.2, 0.5, 0, 1.0, 1.0).is_err());
    }

    #[test]
    fn returns_with_zero_discount_are_rewards() {
        let r = [0.5, -1.0, 2.0];
        assert_eq!(returns_to_go(&r, 0.0), r.to_vec());
        let g = returns_to_go(&r, 0.5);
        assert!((g[0] - (0.5 - 0.5 + 0.5)).abs() < 1e-12);
    }

    #[test]
    fn config_validation() {
        assert!(RewardConfig::default().validate().is_ok());
        for bad in [
            RewardConfig { xi: 0.0, ..Default::default() },
            RewardConfig { beta: -0.1, ..Default::default() },
            RewardConfig { gamma: 1.0, ..Default::default() },
            RewardConfig { budget: 0, ..Default::default() },
        ] {
            assert!(bad.validate().is_err());
        }
    }
}
