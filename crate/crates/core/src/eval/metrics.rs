use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Result of attacking one (query, document) target.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AttackOutcome {
    pub query_id: String,
    pub doc_id: String,
    /// 1-based black-box positions.
    pub rank_before: usize,
    pub rank_after: usize,
    /// Replacement tokens spent.
    pub budget: usize,
    /// Applied word, phrase and sentence perturbations.
    pub counts: [usize; 3],
    pub mode: String,
    #[serde(default)]
    pub adversarial_text: String,
}

impl AttackOutcome {
    pub fn boost(&self) -> f64 {
        self.rank_before as f64 - self.rank_after as f64
    }

    pub fn success(&self) -> bool {
        self.rank_after < self.rank_before
    }
}

pub const DEFAULT_KS: [usize; 2] = [5, 10];

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MetricsReport {
    pub n: usize,
    /// Percentage of targets moved up.
    pub asr: f64,
    /// Mean rank improvement.
    pub boost: f64,
    /// `(k, percentage of targets ending in the top k)`.
    pub top_k: Vec<(usize, f64)>,
    pub mean_budget: f64,
}

impl MetricsReport {
    pub fn top(&self, k: usize) -> Option<f64> {
        self.top_k.iter().find(|(kk, _)| *kk == k).map(|&(_, v)| v)
    }
}

pub fn compute_metrics(outcomes: &[AttackOutcome], ks: &[usize]) -> Result<MetricsReport> {
    if outcomes.is_empty() {
        return Err(Error::InvalidParameter("no outcomes".into()));
    }
    if let Some(o) = outcomes.iter().find(|o| o.rank_before == 0 || o.rank_after == 0) {
        return Err(Error::InvalidParameter(format!("rank 0 for {}/{}", o.query_id, o.doc_id)));
    }
    let n = outcomes.len() as f64;
    let pct = |count: usize| 100.0 * count as f64 / n;
    Ok(MetricsReport {
        n: outcomes.len(),
        asr: pct(outcomes.iter().filter(|o| o.success()).count()),
        boost: outcomes.iter().map(AttackOutcome::boost).sum::<f64>() / n,
        top_k: ks
            .iter()
            .map(|&k| (k, pct(outcomes.iter().filter(|o| o.rank_after <= k).count())))
            .collect(),
        mean_budget: outcomes.iter().map(|o| o.budget as f64).sum::<f64>() / n,
    })
}
