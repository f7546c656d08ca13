//! Attacks the same targets with every attacker variant (full, each single
//! granularity, greedy, fixed word/phrase/sentence cycle, random), then
//! prints metrics, spam screening and a few adversarial documents.
//!
//! cargo run --release --example evaluate_modes [epochs]

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rankattack::agents::{Policies, PolicyConfig};
use rankattack::attacks::GeneratorConfig;
use rankattack::bench::{Benchmark, BenchmarkConfig, QueryShift};
use rankattack::env::{train, AttackerConfig, Environment, NaturalnessOracle, RewardConfig};
use rankattack::eval::{
    compute_metrics, ranked_lists, render_outcomes, render_summary, run_attacks, screen_outcomes, select_targets,
    target_inputs, AttackMode, BlackBox, Difficulty, Report, DEFAULT_KS, DEFAULT_SPAM_WINDOW,
};

fn main() -> anyhow::Result<()> {
    let epochs: usize = std::env::args().nth(1).map(|s| s.parse()).transpose()?.unwrap_or(30);
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

    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let train_queries = data.distill_queries(QueryShift::Iid);
    let train_lists = ranked_lists(&bench.target, &train_queries, &data.corpus)?;
    let train_targets = select_targets(&train_lists, Difficulty::Mixture, 5, &mut rng)?;
    let inputs = target_inputs(&data.corpus, &train_queries, &train_lists, &train_targets)?;
    let mut pols = Policies::random(surrogate.dim(), &PolicyConfig::default());
    let cfg = AttackerConfig {
        epochs,
        ..AttackerConfig::default()
    };
    train(&env, &mut pols, &inputs, &cfg, None)?;

    let queries = data.eval_queries();
    let lists = ranked_lists(&bench.target, &queries, &data.corpus)?;
    let targets = select_targets(&lists, Difficulty::Mixture, 5, &mut rng)?;
    let black_box = BlackBox {
        target: &bench.target,
        corpus: &data.corpus,
    };
    let mut reports = Vec::new();
    for mode in AttackMode::ALL {
        let outcomes = run_attacks(&env, &pols, &black_box, &queries, &lists, &targets, mode, 5)?;
        let screening = screen_outcomes(&outcomes, &data.corpus, &queries, &data.lm, &[0.1, 0.2], DEFAULT_SPAM_WINDOW)?;
        reports.push(Report {
            label: mode.to_string(),
            metrics: compute_metrics(&outcomes, &DEFAULT_KS)?,
            screening: Some(screening),
            outcomes,
        });
    }
    print!("{}", render_summary(&reports));

    let mut full = reports.swap_remove(0);
    full.outcomes.truncate(5);
    println!();
    print!("{}", render_outcomes(&full));
    Ok(())
}
