//! Surrogate distillation from the target's observable rankings.
//!
//! For every training query the target's top-`depth` list is treated as
//! pseudo-relevance feedback: a document ranked at least `gap` places above
//! another becomes the preferred side of a training pair.

use super::model::{NeuralRanker, RankerConfig};
use super::target::TargetRanker;
use super::train::{train_pairwise, PairSet, TrainConfig};
use crate::corpus::{Corpus, Query};
use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct DistillConfig {
    pub model: RankerConfig,
    pub train: TrainConfig,
    /// Length of the target list used per query; the default covers the
    /// whole synthetic corpus.
    pub depth: usize,
    pub gap: usize,
    pub seed: u64,
}

impl Default for DistillConfig {
    fn default() -> Self {
        DistillConfig {
            model: RankerConfig::default(),
            train: TrainConfig::default(),
            depth: 500,
            gap: 10,
            seed: 2002,
        }
    }
}

#[derive(Clone, Debug)]
pub struct Distilled {
    pub surrogate: NeuralRanker,
    pub loss_history: Vec<f64>,
    pub n_pairs: usize,
}

pub fn distill_surrogate(
    target: &TargetRanker,
    queries: &[Query],
    corpus: &Corpus,
    cfg: &DistillConfig,
) -> Result<Distilled> {
    if queries.is_empty() {
        return Err(Error::InvalidParameter("distillation needs at least one query".into()));
    }
    let ids = corpus.ids();
    let depth = cfg.depth.min(ids.len());
    let mut set = PairSet {
        queries: Vec::with_capacity(queries.len()),
        docs: corpus.docs().iter().map(|d| d.tokens.clone()).collect(),
        pairs: Vec::new(),
    };
    let index: std::collections::HashMap<&str, usize> =
        ids.iter().enumerate().map(|(i, id)| (id.as_str(), i)).collect();
    for q in queries {
        let list = target.rank(q, corpus, &ids, depth)?;
        if list.is_empty() {
            return Err(Error::InvalidParameter(format!("target returned an empty list for `{}`", q.id)));
        }
        let qi = set.queries.len();
        set.queries.push(q.tokens.clone());
        let ranked: Vec<usize> = list.ids().iter().map(|id| index[id.as_str()]).collect();
        for i in 0..ranked.len() {
            for j in (i + cfg.gap.max(1))..ranked.len() {
                set.pairs.push((qi, ranked[i], ranked[j]));
            }
        }
    }
    let mut surrogate = NeuralRanker::random(corpus.vocab.len(), cfg.model, cfg.seed);
    let loss_history = if set.pairs.is_empty() || cfg.train.epochs == 0 {
        vec![]
    } else {
        train_pairwise(&mut surrogate, &set, &cfg.train)?
    };
    Ok(Distilled {
        surrogate,
        loss_history,
        n_pairs: set.pairs.len(),
    })
}

/// Kendall's tau-b between two score vectors (higher = better in both).
pub fn kendall_tau(a: &[f64], b: &[f64]) -> f64 {
    assert_eq!(a.len(), b.len());
    let n = a.len();
    let (mut concordant, mut discordant, mut ties_a, mut ties_b) = (0i64, 0i64, 0i64, 0i64);
    for i in 0..n {
        for j in (i + 1)..n {
            let da = (a[i] - a[j]).signum() * ((a[i] != a[j]) as i32 as f64);
            let db = (b[i] - b[j]).signum() * ((b[i] != b[j]) as i32 as f64);
            match (da == 0.0, db == 0.0) {
                (true, true) => {}
                (true, false) => ties_a += 1,
                (false, true) => ties_b += 1,
                (false, false) => {
                    if da == db {
                        concordant += 1
                    } else {
                        discordant += 1
                    }
                }
            }
        }
    }
    let n1 = (concordant + discordant + ties_a) as f64;
    let n2 = (concordant + discordant + ties_b) as f64;
    if n1 == 0.0 || n2 == 0.0 {
        return 0.0;
    }
    (concordant - discordant) as f64 / (n1 * n2).sqrt()
}

/// Mean Kendall tau between the surrogate's scores and the target's ranking
/// over the target's top-`depth` documents of each query (`depth = corpus
/// size` compares full orderings).
pub fn ranking_agreement(
    surrogate: &NeuralRanker,
    target: &TargetRanker,
    queries: &[Query],
    corpus: &Corpus,
    depth: usize,
) -> Result<f64> {
    if queries.is_empty() {
        return Err(Error::InvalidParameter("no queries".into()));
    }
    let ids = corpus.ids();
    let depth = depth.min(ids.len());
    let mut total = 0.0;
    for q in queries {
        let list = target.rank(q, corpus, &ids, depth)?;
        let mut by_target = Vec::with_capacity(list.len());
        let mut by_surrogate = Vec::with_capacity(list.len());
        for (pos, id) in list.ids().iter().enumerate() {
            by_target.push(-(pos as f64));
            by_surrogate.push(surrogate.score(q, corpus.get(id)?)?);
        }
        total += kendall_tau(&by_target, &by_surrogate);
    }
    Ok(total / queries.len() as f64)
}
