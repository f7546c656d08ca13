//! The desk-scale synthetic benchmark: corpus, query splits, black-box
//! target and distilled surrogate, all derived from one seed.

use std::collections::HashMap;
use std::fmt;
use std::str::FromStr;

use crate::corpus::{
    generate_synthetic_corpus, ingest_records, queries_from_records, BigramLm, Corpus, Qrel, Query,
    SyntheticConfig, SyntheticCorpus, DEFAULT_ADD_K, DEFAULT_MAX_DOC_LEN,
};
use crate::attacks::{AttackTables, PhraseTable, SynonymTable};
use crate::error::{Error, Result};
use crate::ranker::{distill_surrogate, DistillConfig, Distilled, TargetConfig, TargetRanker};

/// How distillation queries relate to the held-out evaluation queries.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum QueryShift {
    /// Distillation queries cover every topic.
    Iid,
    /// Distillation queries avoid the topics of the evaluation queries.
    Ood,
}

impl FromStr for QueryShift {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "iid" => Ok(QueryShift::Iid),
            "ood" => Ok(QueryShift::Ood),
            _ => Err(Error::BadValue {
                key: "query_shift".into(),
                value: s.into(),
            }),
        }
    }
}

impl fmt::Display for QueryShift {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            QueryShift::Iid => "iid",
            QueryShift::Ood => "ood",
        })
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct BenchmarkConfig {
    pub synthetic: SyntheticConfig,
    pub max_doc_len: usize,
    pub add_k: f64,
    pub n_target_queries: usize,
    pub n_distill_queries: usize,
    pub n_eval_queries: usize,
    /// Size of each candidate pool the distill / eval splits are drawn from.
    pub pool: usize,
    pub target: TargetConfig,
    pub distill: DistillConfig,
}

impl Default for BenchmarkConfig {
    fn default() -> Self {
        BenchmarkConfig {
            synthetic: SyntheticConfig::default(),
            max_doc_len: DEFAULT_MAX_DOC_LEN,
            add_k: DEFAULT_ADD_K,
            n_target_queries: 100,
            n_distill_queries: 20,
            n_eval_queries: 20,
            pool: 80,
            target: TargetConfig::default(),
            distill: DistillConfig::default(),
        }
    }
}

impl BenchmarkConfig {
    pub fn with_seed(seed: u64) -> Self {
        let mut cfg = BenchmarkConfig::default();
        cfg.synthetic.seed = seed;
        cfg.target.seed = seed.wrapping_mul(31).wrapping_add(1001);
        cfg.distill.seed = seed.wrapping_mul(37).wrapping_add(2002);
        cfg
    }

    fn total_queries(&self) -> usize {
        self.n_target_queries + 2 * self.pool
    }
}

/// Everything that exists before the target is trained: corpus, language
/// model, judgements, synonym groups and the three query pools.
pub struct Dataset {
    pub config: BenchmarkConfig,
    pub synthetic: SyntheticCorpus,
    pub corpus: Corpus,
    pub lm: BigramLm,
    pub qrels: Vec<Qrel>,
    pub target_queries: Vec<Query>,
    distill_pool: Vec<Query>,
    eval_pool: Vec<Query>,
    topics: HashMap<String, usize>,
}

impl Dataset {
    pub fn generate(cfg: &BenchmarkConfig) -> Result<Self> {
        let mut syn_cfg = cfg.synthetic.clone();
        syn_cfg.n_queries = cfg.total_queries();
        let synthetic = generate_synthetic_corpus(&syn_cfg)?;
        let corpus = ingest_records(&synthetic.docs, cfg.max_doc_len)?;
        let lm = BigramLm::from_corpus(&corpus, cfg.add_k)?;
        let queries = queries_from_records(&synthetic.queries, &corpus.vocab)?;
        let topics = synthetic
            .queries
            .iter()
            .zip(&synthetic.query_topics)
            .map(|(r, &t)| (r.id.clone(), t))
            .collect();
        let mut rest = queries;
        let eval_pool = rest.split_off(cfg.n_target_queries + cfg.pool);
        let distill_pool = rest.split_off(cfg.n_target_queries);
        Ok(Dataset {
            config: cfg.clone(),
            qrels: synthetic.qrels.clone(),
            synthetic,
            corpus,
            lm,
            target_queries: rest,
            distill_pool,
            eval_pool,
            topics,
        })
    }

    pub fn topic_of(&self, query_id: &str) -> Option<usize> {
        self.topics.get(query_id).copied()
    }

    fn held_out_topic(&self, q: &Query) -> bool {
        self.topic_of(&q.id).unwrap_or(0) >= self.config.synthetic.n_topics / 2
    }

    /// Held-out queries whose topics lie in the upper half of the topic range.
    pub fn eval_queries(&self) -> Vec<Query> {
        self.eval_pool
            .iter()
            .filter(|q| self.held_out_topic(q))
            .take(self.config.n_eval_queries)
            .cloned()
            .collect()
    }

    pub fn distill_queries(&self, shift: QueryShift) -> Vec<Query> {
        self.distill_pool
            .iter()
            .filter(|q| shift == QueryShift::Iid || !self.held_out_topic(q))
            .take(self.config.n_distill_queries)
            .cloned()
            .collect()
    }

    /// Synonym groups from the generator and a phrase table mined from the corpus.
    pub fn tables(&self, min_phrase_freq: u64) -> AttackTables {
        AttackTables {
            synonyms: SynonymTable::from_groups(&self.synthetic.synonym_groups, &self.corpus.vocab),
            phrases: PhraseTable::from_corpus(&self.corpus, min_phrase_freq),
        }
    }

    pub fn train_target(&self) -> Result<(TargetRanker, Vec<f64>)> {
        TargetRanker::train(&self.corpus, &self.target_queries, &self.qrels, &self.config.target)
    }
}

/// A dataset together with its trained black-box target.
pub struct Benchmark {
    pub data: Dataset,
    pub target: TargetRanker,
    pub target_loss: Vec<f64>,
}

impl Benchmark {
    /// Generates the corpus and trains the black-box target.
    pub fn build(cfg: &BenchmarkConfig) -> Result<Self> {
        let data = Dataset::generate(cfg)?;
        let (target, target_loss) = data.train_target()?;
        Ok(Benchmark {
            data,
            target,
            target_loss,
        })
    }

    pub fn distill(&self, shift: QueryShift) -> Result<Distilled> {
        distill_surrogate(
            &self.target,
            &self.data.distill_queries(shift),
            &self.data.corpus,
            &self.data.config.distill,
        )
    }
}
