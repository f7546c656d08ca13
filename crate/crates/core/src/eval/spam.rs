//! A windowed query-term density detector standing in for utility-based
//! term spamicity screening.

use std::collections::HashMap;

use serde::{Deserialize, Serialize};

use super::metrics::AttackOutcome;
use crate::corpus::{tokenize, BigramLm, Corpus, Query, TokenId};
use crate::error::{Error, Result};

pub const DEFAULT_SPAM_WINDOW: usize = 50;

/// Highest share of query terms in any window of `min(window, l)` tokens.
pub fn spamicity_score(tokens: &[TokenId], q: &Query, window: usize) -> Result<f64> {
    if window == 0 {
        return Err(Error::InvalidParameter("spamicity window must be positive".into()));
    }
    if tokens.is_empty() {
        return Ok(0.0);
    }
    let w = window.min(tokens.len());
    let hits: Vec<usize> = tokens.iter().map(|&t| q.contains(t) as usize).collect();
    let mut count: usize = hits[..w].iter().sum();
    let mut best = count;
    for i in w..hits.len() {
        count = count + hits[i] - hits[i - w];
        best = best.max(count);
    }
    Ok(best as f64 / w as f64)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Screening {
    /// `(threshold, percentage of attacked documents scoring above it)`.
    pub rates: Vec<(f64, f64)>,
    pub mean_spamicity: f64,
    pub mean_ppl_original: f64,
    pub mean_ppl_attacked: f64,
    /// Mean of per-document `PPL(attacked) / PPL(original)`.
    pub mean_ppl_ratio: f64,
}

/// Flags attacked documents per threshold and compares perplexities.
pub fn screen_outcomes(
    outcomes: &[AttackOutcome],
    corpus: &Corpus,
    queries: &[Query],
    lm: &BigramLm,
    thresholds: &[f64],
    window: usize,
) -> Result<Screening> {
    if outcomes.is_empty() {
        return Err(Error::InvalidParameter("no outcomes".into()));
    }
    if thresholds.windows(2).any(|w| w[0] > w[1]) {
        return Err(Error::InvalidParameter("thresholds must be sorted ascending".into()));
    }
    let by_id: HashMap<&str, &Query> = queries.iter().map(|q| (q.id.as_str(), q)).collect();
    let mut scores = Vec::with_capacity(outcomes.len());
    let (mut ppl_o, mut ppl_a, mut ratio) = (0.0, 0.0, 0.0);
    for o in outcomes {
        let q = by_id
            .get(o.query_id.as_str())
            .ok_or_else(|| Error::InvalidParameter(format!("unknown query `{}`", o.query_id)))?;
        let original = &corpus.get(&o.doc_id)?.tokens;
        let attacked = tokenize(&o.adversarial_text, &corpus.vocab);
        let attacked = if attacked.is_empty() { original.clone() } else { attacked };
        scores.push(spamicity_score(&attacked, q, window)?);
        let (a, b) = (lm.perplexity(original)?, lm.perplexity(&attacked)?);
        ppl_o += a;
        ppl_a += b;
        ratio += b / a;
    }
    let n = outcomes.len() as f64;
    Ok(Screening {
        rates: thresholds
            .iter()
            .map(|&t| (t, 100.0 * scores.iter().filter(|&&s| s > t).count() as f64 / n))
            .collect(),
        mean_spamicity: scores.iter().sum::<f64>() / n,
        mean_ppl_original: ppl_o / n,
        mean_ppl_attacked: ppl_a / n,
        mean_ppl_ratio: ratio / n,
    })
}
