//! A tiny synthetic collection with a random, untrained surrogate.

use rankattack::attacks::{AttackTables, PhraseTable, SynonymTable};
use rankattack::corpus::{
    generate_synthetic_corpus, ingest_records, queries_from_records, BigramLm, Corpus, Query, SyntheticConfig,
};
use rankattack::ranker::{NeuralRanker, RankerConfig};

pub struct SmallWorld {
    pub corpus: Corpus,
    pub lm: BigramLm,
    pub queries: Vec<Query>,
    pub tables: AttackTables,
    pub surrogate: NeuralRanker,
}

pub fn small_world(seed: u64) -> SmallWorld {
    let cfg = SyntheticConfig {
        seed,
        n_docs: 40,
        n_queries: 8,
        n_topics: 4,
        vocab_size: 300,
        min_doc_len: 30,
        max_doc_len: 90,
        synonym_group: 4,
        query_head: 12,
    };
    let syn = generate_synthetic_corpus(&cfg).unwrap();
    let corpus = ingest_records(&syn.docs, 512).unwrap();
    let lm = BigramLm::from_corpus(&corpus, 0.1).unwrap();
    let queries = queries_from_records(&syn.queries, &corpus.vocab).unwrap();
    let tables = AttackTables {
        synonyms: SynonymTable::from_groups(&syn.synonym_groups, &corpus.vocab),
        phrases: PhraseTable::from_corpus(&corpus, 2),
    };
    let surrogate = NeuralRanker::random(corpus.vocab.len(), RankerConfig { dim: 8, hidden: 8 }, seed);
    SmallWorld {
        corpus,
        lm,
        queries,
        tables,
        surrogate,
    }
}
