//! Generates the synthetic benchmark corpus, writes it as JSON lines and
//! reads it back through the same ingestion path a real collection uses.
//!
//! cargo run --release --example synthetic_corpus

use rankattack::corpus::{generate_synthetic_corpus, ingest_corpus, write_records, BigramLm, SyntheticConfig};

fn main() -> anyhow::Result<()> {
    let cfg = SyntheticConfig::default();
    let syn = generate_synthetic_corpus(&cfg)?;
    println!(
        "{} documents, {} queries, {} judgements, {} synonym groups",
        syn.docs.len(),
        syn.queries.len(),
        syn.qrels.len(),
        syn.synonym_groups.len()
    );

    let dir = std::env::temp_dir().join("rankattack-example-corpus");
    std::fs::create_dir_all(&dir)?;
    let path = dir.join("corpus.jsonl");
    write_records(&path, &syn.docs)?;
    let corpus = ingest_corpus(&path, 512)?;
    let lengths: Vec<usize> = corpus.docs().iter().map(|d| d.len()).collect();
    println!(
        "ingested {} docs, vocabulary {}, length {}..={}",
        corpus.len(),
        corpus.vocab.len(),
        lengths.iter().min().unwrap(),
        lengths.iter().max().unwrap()
    );

    let lm = BigramLm::from_corpus(&corpus, 0.1)?;
    let doc = &corpus.docs()[0];
    println!("\n{} ({} sentences, perplexity {:.1}):", doc.id, doc.sentence_bounds.len(), lm.perplexity(&doc.tokens)?);
    println!("{}", doc.text.chars().take(300).collect::<String>());

    let q = &syn.queries[0];
    let graded: Vec<_> = syn.qrels.iter().filter(|r| r.query_id == q.id).collect();
    println!("\nquery {} `{}` has {} graded documents", q.id, q.text, graded.len());
    for group in syn.synonym_groups.iter().take(3) {
        println!("synonyms: {}", group.join(" "));
    }
    Ok(())
}
