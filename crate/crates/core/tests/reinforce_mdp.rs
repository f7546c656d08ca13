//! Policy-gradient estimates on an enumerable MDP with rewards everywhere.

mod common;

use common::{objective_fd, Mdp};
use rankattack::agents::{Label, Policies, PolicyConfig};

fn rich_mdp() -> Mdp {
    Mdp::random(
        44,
        2,
        1.5,
        Box::new(|labels: &[Label], accepted: &[usize]| {
            let t = accepted.len() - 1;
            let base = [1.0, -0.5, 2.0][accepted[t]] * (1.0 + 0.5 * t as f64);
            if t == 0 {
                let w = labels.iter().filter(|&&l| l == Label::W).count() as f64;
                let n = labels.iter().filter(|&&l| l == Label::N).count() as f64;
                base + 0.5 * w - 0.5 * n
            } else {
                base
            }
        }),
    )
}

#[test]
fn exact_gradient_matches_finite_differences() {
    let mdp = rich_mdp();
    let pols = Policies::random(2, &PolicyConfig { hidden: 3, seed: 9 });
    let exact = mdp.exact_gradient(&pols);
    let fd = objective_fd(&mdp, &pols, 1e-5);
    for (k, (a, b)) in exact.iter().zip(&fd).enumerate() {
        assert!((a - b).abs() < 1e-6, "coordinate {k}: exact {a} fd {b}");
    }
}

#[test]
fn sampled_estimate_is_within_noise_of_exact() {
    let mdp = rich_mdp();
    let pols = Policies::random(2, &PolicyConfig { hidden: 3, seed: 9 });
    let exact = mdp.exact_gradient(&pols);
    let sd = mdp.estimator_sd(&pols);
    let n = 50_000;
    let mc = mdp.monte_carlo(&pols, n, 1);
    for k in 0..exact.len() {
        let se = sd[k] / (n as f64).sqrt();
        let z = (mc[k] - exact[k]) / se.max(1e-12);
        assert!(z.abs() < 4.5, "coordinate {k}: exact {} mc {} z {z:.2}", exact[k], mc[k]);
    }
}

#[test]
fn enumerated_probabilities_sum_to_one() {
    let mdp = rich_mdp();
    let pols = Policies::random(2, &PolicyConfig { hidden: 3, seed: 2 });
    let total: f64 = mdp
        .enumerate()
        .iter()
        .map(|t| rankattack::agents::log_prob(&pols, &t.record).unwrap().exp())
        .sum();
    assert!((total - 1.0).abs() < 1e-12, "{total}");
}
