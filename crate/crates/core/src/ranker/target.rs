use std::collections::HashMap;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::checkpoint::Checkpoint;
use super::model::{NeuralRanker, RankerConfig};
use super::train::{train_pairwise, PairSet, TrainConfig};
use super::RankedList;
use crate::corpus::{Corpus, Document, Qrel, Query};
use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct TargetConfig {
    pub model: RankerConfig,
    pub train: TrainConfig,
    /// Cap on graded documents sampled per training query.
    pub max_positives: usize,
    /// Ungraded documents sampled per training query.
    pub negatives: usize,
    pub seed: u64,
}

impl Default for TargetConfig {
    fn default() -> Self {
        TargetConfig {
            model: RankerConfig::default(),
            train: TrainConfig::default(),
            max_positives: 60,
            negatives: 20,
            seed: 1001,
        }
    }
}

/// The black-box ranker under attack.
///
/// Only rank positions leave this type; there is no way to read a score
/// through it:
///
/// ```compile_fail
/// # use rankattack::ranker::TargetRanker;
/// fn peek(t: &TargetRanker, q: &rankattack::corpus::Query, d: &rankattack::corpus::Document) -> f64 {
///     t.score(q, d).unwrap()
/// }
/// ```
#[derive(Clone, Debug)]
pub struct TargetRanker {
    model: NeuralRanker,
}

impl TargetRanker {
    /// Trains the hidden scorer on graded judgements with the pairwise hinge.
    pub fn train(corpus: &Corpus, queries: &[Query], qrels: &[Qrel], cfg: &TargetConfig) -> Result<(Self, Vec<f64>)> {
        let mut grades: HashMap<(&str, &str), u8> = HashMap::new();
        for q in qrels {
            grades.insert((q.query_id.as_str(), q.doc_id.as_str()), q.grade);
        }
        let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
        let docs = corpus.docs();
        let mut set = PairSet {
            queries: Vec::new(),
            docs: docs.iter().map(|d| d.tokens.clone()).collect(),
            pairs: Vec::new(),
        };
        for q in queries {
            let mut graded = Vec::new();
            let mut ungraded = Vec::new();
            for (i, d) in docs.iter().enumerate() {
                match grades.get(&(q.id.as_str(), d.id.as_str())) {
                    Some(&g) if g > 0 => graded.push((i, g)),
                    _ => ungraded.push((i, 0u8)),
                }
            }
            graded.shuffle(&mut rng);
            graded.truncate(cfg.max_positives);
            ungraded.shuffle(&mut rng);
            ungraded.truncate(cfg.negatives);
            graded.extend(ungraded);
            let qi = set.queries.len();
            set.queries.push(q.tokens.clone());
            for &(a, ga) in &graded {
                for &(b, gb) in &graded {
                    if ga > gb {
                        set.pairs.push((qi, a, b));
                    }
                }
            }
        }
        let mut model = NeuralRanker::random(corpus.vocab.len(), cfg.model, cfg.seed);
        let history = train_pairwise(&mut model, &set, &cfg.train)?;
        Ok((TargetRanker { model }, history))
    }

    #[cfg(test)]
    pub(crate) fn from_model(model: NeuralRanker) -> Self {
        TargetRanker { model }
    }

    /// Ranks corpus documents by id and returns the top `k`.
    pub fn rank(&self, q: &Query, corpus: &Corpus, candidates: &[String], k: usize) -> Result<RankedList> {
        let docs = candidates
            .iter()
            .map(|id| corpus.get(id))
            .collect::<Result<Vec<_>>>()?;
        self.rank_documents(q, &docs, k)
    }

    /// Ranks arbitrary documents (e.g. a perturbed copy standing in for the
    /// original). Ties fall back to query-term overlap, then id.
    pub fn rank_documents(&self, q: &Query, docs: &[&Document], k: usize) -> Result<RankedList> {
        if k > docs.len() {
            return Err(Error::InvalidParameter(format!(
                "k = {k} exceeds {} candidates",
                docs.len()
            )));
        }
        let mut keyed = docs
            .iter()
            .map(|d| Ok((self.model.score(q, d)?, q.overlap(&d.tokens), d.id.as_str())))
            .collect::<Result<Vec<_>>>()?;
        keyed.sort_by(|a, b| {
            b.0.total_cmp(&a.0)
                .then_with(|| b.1.cmp(&a.1))
                .then_with(|| a.2.cmp(b.2))
        });
        let ids = keyed.iter().take(k).map(|(_, _, id)| id.to_string()).collect();
        Ok(RankedList::new(q.id.clone(), ids))
    }

    /// Hands the hidden scorer to a white-box attacker. Nothing in the
    /// black-box pipeline calls this.
    pub fn white_box_model(&self) -> NeuralRanker {
        self.model.clone()
    }

    pub fn to_checkpoint(&self, config_hash: &str) -> Checkpoint {
        self.model.to_checkpoint("target", config_hash)
    }

    pub fn from_checkpoint(ck: &Checkpoint) -> Result<Self> {
        ck.expect_kind("target")?;
        Ok(TargetRanker {
            model: NeuralRanker::from_checkpoint(ck)?,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::{ingest_records, Record};

    fn corpus() -> Corpus {
        let recs: Vec<Record> = (0..6)
            .map(|i| Record {
                id: format!("d{i}"),
                text: format!("alpha beta w{i} w{}", i + 1),
            })
            .collect();
        ingest_records(&recs, 512).unwrap()
    }

    #[test]
    fn single_candidate_is_rank_one() {
        let c = corpus();
        let t = TargetRanker::from_model(NeuralRanker::random(c.vocab.len(), RankerConfig::default(), 1));
        let q = Query::new("q", "alpha", &c.vocab).unwrap();
        let list = t.rank(&q, &c, &["d3".to_string()], 1).unwrap();
        assert_eq!(list.position("d3"), Some(1));
    }

    #[test]
    fn identical_scores_break_ties_by_id() {
        let c = corpus();
        let t = TargetRanker::from_model(NeuralRanker::zeros(c.vocab.len(), RankerConfig::default()));
        let q = Query::new("q", "w9", &c.vocab).unwrap();
        let list = t.rank(&q, &c, &["d4".into(), "d2".into()], 2).unwrap();
        assert_eq!(list.ids(), ["d2", "d4"]);
        // overlap wins before id
        let q = Query::new("q", "w5", &c.vocab).unwrap();
        let list = t.rank(&q, &c, &["d2".into(), "d4".into()], 2).unwrap();
        assert_eq!(list.ids(), ["d4", "d2"]);
    }

    #[test]
    fn unknown_id_is_an_error() {
        let c = corpus();
        let t = TargetRanker::from_model(NeuralRanker::zeros(c.vocab.len(), RankerConfig::default()));
        let q = Query::new("q", "alpha", &c.vocab).unwrap();
        assert!(matches!(
            t.rank(&q, &c, &["nope".into()], 1),
            Err(Error::UnknownDocument(_))
        ));
    }
}
