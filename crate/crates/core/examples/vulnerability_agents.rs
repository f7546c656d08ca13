//! One greedy episode of the two-agent attacker with untrained policies:
//! the indicator labels every token, labels are decoded into spans, the
//! generators propose one replacement per span and the aggregator applies
//! them one at a time until the budget runs out.
//!
//! cargo run --release --example vulnerability_agents

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rankattack::agents::{decode_spans, label_positions, DecisionMode, Policies, PolicyConfig};
use rankattack::bench::{Benchmark, BenchmarkConfig, QueryShift};
use rankattack::env::{Environment, NaturalnessOracle, RewardConfig};
use rankattack::attacks::GeneratorConfig;
use rankattack::eval::{episode_input, ranked_lists};

fn main() -> anyhow::Result<()> {
    let bench = Benchmark::build(&BenchmarkConfig::with_seed(7))?;
    let data = &bench.data;
    let surrogate = bench.distill(QueryShift::Iid)?.surrogate;
    let tables = data.tables(3);
    let oracle = NaturalnessOracle::local(&surrogate, &data.lm);
    let env = Environment {
        surrogate: &surrogate,
        lm: &data.lm,
        tables: &tables,
        oracle: &oracle,
        reward: RewardConfig::default(),
        generator: GeneratorConfig::default(),
    };

    let queries = data.eval_queries();
    let lists = ranked_lists(&bench.target, &queries[..1], &data.corpus)?;
    let input = episode_input(&data.corpus, &queries[0], &lists[0], lists[0].at(50).unwrap())?;
    let pols = Policies::random(surrogate.dim(), &PolicyConfig::default());

    let prepared = env.prepare(&pols, &input)?;
    let mut rng = ChaCha8Rng::seed_from_u64(0);
    let (labels, _) = label_positions(&prepared.u, DecisionMode::Argmax, &mut rng);
    let mut spans = decode_spans(&labels, &input.doc.sentence_bounds);
    prepared.u.annotate(&mut spans);
    let tags: String = labels
        .iter()
        .map(|l| l.granularity().map_or('.', |g| g.symbol()))
        .collect();
    println!("labels for {} ({} tokens):\n{tags}", input.doc.id, labels.len());
    println!("{} spans decoded", spans.len());
    for s in spans.iter().take(8) {
        println!("  {} [{}..{}) confidence {:.3}", s.granularity, s.start, s.end, s.confidence);
    }

    let traj = env.run_episode(&pols, &input, DecisionMode::Argmax, &mut rng)?;
    let vocab = &data.corpus.vocab;
    println!("\nsurrogate score {:.4} -> {:.4}, {:?}", traj.initial_score, traj.final_score, traj.termination);
    for s in &traj.steps {
        let c = &traj.candidates[s.candidate];
        println!(
            "  {} `{}` -> `{}` reward {:+.3} sim {:.3} flu {:.3} budget {}",
            s.granularity,
            vocab.detokenize(&input.doc.tokens[c.span.start..c.span.end]),
            vocab.detokenize(&c.replacement),
            s.reward,
            s.similarity,
            s.fluency,
            s.consumed
        );
    }
    Ok(())
}
