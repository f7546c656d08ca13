//! Attacker training under the bundled configuration.

use rankattack::config::Config;
use rankattack::env::EpochLog;
use rankattack::pipeline;

const SMOOTHING: usize = 5;

#[test]
fn smoothed_mean_return_does_not_decrease() {
    let dir = tempfile::tempdir().unwrap();
    let mut cfg = Config::default_config();
    cfg.set("workdir", dir.path().to_str().unwrap());
    for stage in [pipeline::gen_corpus, pipeline::train_target, pipeline::distill, pipeline::train_attacker] {
        stage(&cfg).unwrap();
    }
    let text = std::fs::read_to_string(dir.path().join("train_log.jsonl")).unwrap();
    let returns: Vec<f64> = text
        .lines()
        .map(|l| serde_json::from_str::<EpochLog>(l).unwrap())
        .filter(|e| e.phase == "train")
        .map(|e| e.mean_return)
        .collect();
    let blocks: Vec<f64> = returns
        .chunks(SMOOTHING)
        .map(|c| c.iter().sum::<f64>() / c.len() as f64)
        .collect();
    println!("{SMOOTHING}-epoch mean returns: {blocks:.3?}");
    for w in blocks.windows(2) {
        assert!(w[1] >= w[0], "smoothed return fell: {blocks:?}");
    }
}
