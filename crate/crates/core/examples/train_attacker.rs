//! Trains the indicator and aggregator with REINFORCE on surrogate rewards,
//! then compares the frozen attacker with random perturbations against the
//! black box.
//!
//! cargo run --release --example train_attacker [epochs]

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rankattack::agents::{Policies, PolicyConfig};
use rankattack::attacks::GeneratorConfig;
use rankattack::bench::{Benchmark, BenchmarkConfig, QueryShift};
use rankattack::env::{train, AttackerConfig, Environment, NaturalnessOracle, RewardConfig};
use rankattack::eval::{
    compute_metrics, ranked_lists, run_attacks, select_targets, target_inputs, AttackMode, BlackBox, Difficulty,
};

fn main() -> anyhow::Result<()> {
    let epochs: usize = std::env::args().nth(1).map(|s| s.parse()).transpose()?.unwrap_or(10);
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
    let mut log = std::io::stdout();
    train(&env, &mut pols, &inputs, &cfg, Some(&mut log))?;

    let eval_queries = data.eval_queries();
    let eval_lists = ranked_lists(&bench.target, &eval_queries, &data.corpus)?;
    let eval_targets = select_targets(&eval_lists, Difficulty::Mixture, 5, &mut rng)?;
    let black_box = BlackBox {
        target: &bench.target,
        corpus: &data.corpus,
    };
    for mode in [AttackMode::Full, AttackMode::Random] {
        let outcomes = run_attacks(&env, &pols, &black_box, &eval_queries, &eval_lists, &eval_targets, mode, 5)?;
        let m = compute_metrics(&outcomes, &[5, 10])?;
        println!("{mode}: success {:.2}%, boost {:.2}, budget {:.2}", m.asr, m.boost, m.mean_budget);
    }
    Ok(())
}
