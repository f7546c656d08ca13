//! Seeded topic-mixture corpus with graded relevance.
//!
//! Each topic owns a disjoint pool of pseudo-words; a shared pool of
//! function words and fillers glues sentences together. Sentences follow a
//! per-topic successor table so the text has bigram structure a language
//! model can pick up.

use std::collections::HashSet;

use rand::seq::{IndexedRandom, SliceRandom};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::{split_words, Qrel, Record};
use crate::error::{Error, Result};

const FUNCTION_WORDS: &[&str] = &[
    "the", "of", "and", "a", "to", "in", "is", "for", "on", "with", "as", "by", "at", "from",
    "that", "this", "it", "are", "was", "be", "or", "an", "which", "has", "its", "their", "more",
    "also", "can", "into",
];

const ONSETS: &[&str] = &[
    "b", "d", "f", "g", "k", "l", "m", "n", "p", "r", "s", "t", "v", "z", "br", "tr", "st", "pl",
    "gr", "sh",
];
const NUCLEI: &[&str] = &["a", "e", "i", "o", "u", "ai", "ou"];
const CODAS: &[&str] = &["", "n", "r", "l", "s", "x", "m"];

const SUCCESSORS: usize = 3;

#[derive(Clone, Debug, PartialEq)]
pub struct SyntheticConfig {
    pub seed: u64,
    pub n_docs: usize,
    pub n_queries: usize,
    pub n_topics: usize,
    pub vocab_size: usize,
    pub min_doc_len: usize,
    pub max_doc_len: usize,
    pub synonym_group: usize,
    /// Queries draw their terms from this many most frequent topic terms.
    pub query_head: usize,
}

impl Default for SyntheticConfig {
    fn default() -> Self {
        SyntheticConfig {
            seed: 7,
            n_docs: 500,
            n_queries: 40,
            n_topics: 10,
            vocab_size: 1500,
            min_doc_len: 100,
            max_doc_len: 200,
            synonym_group: 4,
            query_head: 12,
        }
    }
}

#[derive(Clone, Debug)]
pub struct SyntheticCorpus {
    pub docs: Vec<Record>,
    pub queries: Vec<Record>,
    pub query_topics: Vec<usize>,
    pub qrels: Vec<Qrel>,
    /// Term pool of each topic, most frequent first.
    pub topic_terms: Vec<Vec<String>>,
    /// Shared pool (function words first).
    pub common_terms: Vec<String>,
    /// Groups of interchangeable words; every member is a synonym of the others.
    pub synonym_groups: Vec<Vec<String>>,
}

/// Relevance grade: occurrences of query terms in the document, clipped to 3.
pub fn relevance_grade(query_words: &[String], doc_words: &[String]) -> u8 {
    let terms: HashSet<&str> = query_words.iter().map(String::as_str).collect();
    let hits = doc_words.iter().filter(|w| terms.contains(w.as_str())).count();
    hits.min(3) as u8
}

fn pseudo_words(rng: &mut ChaCha8Rng, n: usize) -> Vec<String> {
    let mut seen: HashSet<String> = FUNCTION_WORDS.iter().map(|w| w.to_string()).collect();
    let mut out = Vec::with_capacity(n);
    while out.len() < n {
        let syllables = rng.random_range(2..=3);
        let mut w = String::new();
        for _ in 0..syllables {
            w.push_str(ONSETS.choose(rng).expect("non-empty"));
            w.push_str(NUCLEI.choose(rng).expect("non-empty"));
        }
        w.push_str(CODAS.choose(rng).expect("non-empty"));
        if seen.insert(w.clone()) {
            out.push(w);
        }
    }
    out
}

/// Zipf-like weights `1 / (rank + 1)^0.8`, as a cumulative table.
fn zipf_cdf(n: usize) -> Vec<f64> {
    let mut acc = 0.0;
    let mut cdf: Vec<f64> = (0..n)
        .map(|r| {
            acc += 1.0 / ((r + 1) as f64).powf(0.8);
            acc
        })
        .collect();
    for c in &mut cdf {
        *c /= acc;
    }
    cdf
}

fn sample_cdf(rng: &mut ChaCha8Rng, cdf: &[f64]) -> usize {
    let u: f64 = rng.random();
    cdf.partition_point(|&c| c < u).min(cdf.len() - 1)
}

struct Topic {
    terms: Vec<usize>,
    cdf: Vec<f64>,
    /// successor word indices, keyed by word index into `words`
    successors: Vec<Vec<usize>>,
}

pub fn generate_synthetic_corpus(cfg: &SyntheticConfig) -> Result<SyntheticCorpus> {
    if cfg.n_topics < 2 {
        return Err(Error::InvalidParameter("n_topics must be at least 2".into()));
    }
    if cfg.vocab_size < 50 * cfg.n_topics {
        return Err(Error::InvalidParameter(format!(
            "vocab_size {} must be at least 50 * n_topics = {}",
            cfg.vocab_size,
            50 * cfg.n_topics
        )));
    }
    if cfg.n_docs == 0 || cfg.min_doc_len < 6 || cfg.min_doc_len > cfg.max_doc_len {
        return Err(Error::InvalidParameter(
            "need n_docs > 0 and 6 <= min_doc_len <= max_doc_len".into(),
        ));
    }
    if cfg.synonym_group < 2 {
        return Err(Error::InvalidParameter("synonym_group must be at least 2".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);

    let n_common = cfg.vocab_size / 5;
    let per_topic = (cfg.vocab_size - n_common) / cfg.n_topics;
    let n_pseudo = n_common.saturating_sub(FUNCTION_WORDS.len()) + per_topic * cfg.n_topics;
    let pseudo = pseudo_words(&mut rng, n_pseudo);
    let mut words: Vec<String> = FUNCTION_WORDS
        .iter()
        .take(n_common)
        .map(|w| w.to_string())
        .collect();
    words.extend(pseudo);
    let common: Vec<usize> = (0..n_common).collect();
    let common_cdf = zipf_cdf(n_common);

    let mut topics = Vec::with_capacity(cfg.n_topics);
    for t in 0..cfg.n_topics {
        let start = n_common + t * per_topic;
        let terms: Vec<usize> = (start..start + per_topic).collect();
        let cdf = zipf_cdf(per_topic);
        let mut successors = vec![Vec::new(); words.len()];
        for &w in terms.iter().chain(&common) {
            successors[w] = (0..SUCCESSORS)
                .map(|_| {
                    if rng.random_bool(0.6) {
                        terms[sample_cdf(&mut rng, &cdf)]
                    } else {
                        common[sample_cdf(&mut rng, &common_cdf)]
                    }
                })
                .collect();
        }
        topics.push(Topic {
            terms,
            cdf,
            successors,
        });
    }

    let sentence = |rng: &mut ChaCha8Rng, topic: &Topic| -> Vec<usize> {
        let len = rng.random_range(6..=14);
        let mut s = vec![topic.terms[sample_cdf(rng, &topic.cdf)]];
        while s.len() < len {
            let prev = *s.last().expect("non-empty");
            let next = if rng.random_bool(0.6) {
                *topic.successors[prev].choose(rng).expect("non-empty")
            } else if rng.random_bool(0.6) {
                topic.terms[sample_cdf(rng, &topic.cdf)]
            } else {
                common[sample_cdf(rng, &common_cdf)]
            };
            s.push(next);
        }
        s
    };

    let mut docs = Vec::with_capacity(cfg.n_docs);
    let mut doc_words: Vec<Vec<String>> = Vec::with_capacity(cfg.n_docs);
    for i in 0..cfg.n_docs {
        let n_mix = rng.random_range(1..=3usize);
        let mut order: Vec<usize> = (0..cfg.n_topics).collect();
        order.shuffle(&mut rng);
        let mixture = &order[..n_mix];
        let mut weights = vec![1.0];
        for _ in 1..n_mix {
            weights.push(rng.random_range(0.3..0.7));
        }
        let total: f64 = weights.iter().sum();
        let target_len = rng.random_range(cfg.min_doc_len..=cfg.max_doc_len);
        let mut text = String::new();
        let mut len = 0;
        while len < target_len {
            let mut u = rng.random_range(0.0..total);
            let mut pick = mixture[n_mix - 1];
            for (k, w) in weights.iter().enumerate() {
                if u < *w {
                    pick = mixture[k];
                    break;
                }
                u -= w;
            }
            let mut s = sentence(&mut rng, &topics[pick]);
            s.truncate(target_len - len);
            len += s.len();
            let rendered: Vec<&str> = s.iter().map(|&w| words[w].as_str()).collect();
            if !text.is_empty() {
                text.push(' ');
            }
            text.push_str(&rendered.join(" "));
            text.push('.');
        }
        doc_words.push(split_words(&text).0);
        docs.push(Record {
            id: format!("d{i}"),
            text,
        });
    }

    let mut queries = Vec::with_capacity(cfg.n_queries);
    let mut query_topics = Vec::with_capacity(cfg.n_queries);
    let mut qrels = Vec::new();
    for i in 0..cfg.n_queries {
        let topic_idx = rng.random_range(0..cfg.n_topics);
        let topic = &topics[topic_idx];
        let n_terms = rng.random_range(2..=4);
        // draw from the frequent head of the pool so grades are not all zero
        let head = topic.terms.len().min(cfg.query_head.max(4));
        let mut picked = Vec::with_capacity(n_terms);
        while picked.len() < n_terms {
            let w = topic.terms[sample_cdf(&mut rng, &topic.cdf[..head])];
            if !picked.contains(&w) {
                picked.push(w);
            }
        }
        let qwords: Vec<String> = picked.iter().map(|&w| words[w].clone()).collect();
        let id = format!("q{i}");
        for (d, dw) in docs.iter().zip(&doc_words) {
            let grade = relevance_grade(&qwords, dw);
            if grade > 0 {
                qrels.push(Qrel {
                    query_id: id.clone(),
                    doc_id: d.id.clone(),
                    grade,
                });
            }
        }
        queries.push(Record {
            id,
            text: qwords.join(" "),
        });
        query_topics.push(topic_idx);
    }

    let mut synonym_groups = Vec::new();
    let fillers: Vec<usize> = common[FUNCTION_WORDS.len().min(n_common)..].to_vec();
    for pool in topics.iter().map(|t| &t.terms).chain(std::iter::once(&fillers)) {
        let mut shuffled = pool.clone();
        shuffled.shuffle(&mut rng);
        for chunk in shuffled.chunks(cfg.synonym_group) {
            if chunk.len() >= 2 {
                synonym_groups.push(chunk.iter().map(|&w| words[w].clone()).collect());
            }
        }
    }

    Ok(SyntheticCorpus {
        docs,
        queries,
        query_topics,
        qrels,
        topic_terms: topics
            .iter()
            .map(|t| t.terms.iter().map(|&w| words[w].clone()).collect())
            .collect(),
        common_terms: common.iter().map(|&w| words[w].clone()).collect(),
        synonym_groups,
    })
}
