//! Builds one word, one phrase and one sentence perturbation for a
//! mid-ranked document and shows how each moves the surrogate score.
//!
//! cargo run --release --example perturbations

use rankattack::attacks::{generate_candidates, AttackContext, GeneratorConfig, Granularity, PerturbationSpan};
use rankattack::bench::{Benchmark, BenchmarkConfig, QueryShift};
use rankattack::ranker::QueryScorer;

fn main() -> anyhow::Result<()> {
    let bench = Benchmark::build(&BenchmarkConfig::with_seed(7))?;
    let data = &bench.data;
    let surrogate = bench.distill(QueryShift::Iid)?.surrogate;
    let tables = data.tables(3);
    println!("{} synonym entries, {} phrases", tables.synonyms.len(), tables.phrases.len());

    let query = &data.eval_queries()[0];
    let list = bench.target.rank(query, &data.corpus, &data.corpus.ids(), 100)?;
    let doc = data.corpus.get(list.at(40).unwrap())?;
    let vocab = &data.corpus.vocab;
    println!("query `{}`, document {} at rank 40", query.text, doc.id);

    let word = (0..doc.len())
        .find(|&i| !tables.synonyms.get(doc.tokens[i]).is_empty())
        .unwrap_or(0);
    let sentence = doc
        .sentence_bounds
        .iter()
        .copied()
        .find(|&(s, e)| (6..=10).contains(&(e - s)) && (word < s || word >= e))
        .unwrap_or((doc.len() - 8, doc.len()));
    let phrase_start = (0..doc.len() - 3)
        .find(|&p| (word < p || word >= p + 3) && (p + 3 <= sentence.0 || p >= sentence.1))
        .unwrap();
    let mut spans = vec![
        PerturbationSpan::new(Granularity::Word, word, word + 1),
        PerturbationSpan::new(Granularity::Phrase, phrase_start, phrase_start + 3),
        PerturbationSpan::new(Granularity::Sentence, sentence.0, sentence.1),
    ];
    spans.sort_by_key(|s| s.start);

    let scorer = QueryScorer::new(&surrogate, &query.tokens)?;
    let ctx = AttackContext::new(&scorer, query, &doc.tokens)?;
    let cands = generate_candidates(&ctx, &spans, &tables, &data.lm, &GeneratorConfig::default())?;
    println!("base surrogate score {:.4}", ctx.base_score());
    for c in &cands {
        println!(
            "{} [{}..{}) `{}` -> `{}`  score {:+.4}{}",
            c.span.granularity,
            c.span.start,
            c.span.end,
            vocab.detokenize(&doc.tokens[c.span.start..c.span.end]),
            vocab.detokenize(&c.replacement),
            c.score - ctx.base_score(),
            if c.no_op { " (no-op)" } else { "" }
        );
    }
    Ok(())
}
