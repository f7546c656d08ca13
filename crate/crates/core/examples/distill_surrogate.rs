//! Trains the black-box target on graded judgements, then distills a
//! surrogate from nothing but the target's rankings, with distillation
//! queries drawn either from all topics or only from topics disjoint from
//! the evaluation queries.
//!
//! cargo run --release --example distill_surrogate

use rankattack::bench::{Benchmark, BenchmarkConfig, QueryShift};
use rankattack::ranker::ranking_agreement;

fn main() -> anyhow::Result<()> {
    let bench = Benchmark::build(&BenchmarkConfig::with_seed(7))?;
    let data = &bench.data;
    println!(
        "target loss {:.4} -> {:.4} over {} queries",
        bench.target_loss[0],
        bench.target_loss.last().unwrap(),
        data.target_queries.len()
    );

    let eval = data.eval_queries();
    let q = &eval[0];
    let list = bench.target.rank(q, &data.corpus, &data.corpus.ids(), 5)?;
    println!("black box top 5 for `{}`: {:?}", q.text, list.ids());

    for shift in [QueryShift::Iid, QueryShift::Ood] {
        let d = bench.distill(shift)?;
        let tau = ranking_agreement(&d.surrogate, &bench.target, &eval, &data.corpus, data.corpus.len())?;
        println!(
            "{shift}: {} pairs, loss {:.4} -> {:.4}, held-out Kendall tau {tau:.4}",
            d.n_pairs,
            d.loss_history[0],
            d.loss_history.last().unwrap()
        );
    }
    Ok(())
}
