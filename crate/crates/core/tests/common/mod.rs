//! An enumerable attack MDP for checking policy-gradient estimates.
//!
//! Three fixed candidates of lengths 1, 2 and 3 under a budget of 3, so at
//! most two selections are accepted before one overflows. Labels for three
//! positions come from the indicator and the aggregator picks among the
//! candidates still available. Every trajectory can be listed, which gives
//! the exact objective and the exact gradient.

#![allow(dead_code)]

pub mod world;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use rankattack::agents::{
    label_positions, log_prob, log_prob_grad, predict_from_features, select_perturbation, DecisionMode,
    DecisionRecord, Label, Policies, SelectionRecord, SpanOption,
};
use rankattack::attacks::Granularity;
use rankattack::env::{estimate_gradient, Rejection, Step, Termination, Trajectory};

pub const BUDGET: usize = 3;
pub const GAMMA: f64 = 0.9;
pub const POSITIONS: usize = 3;

/// Reward for accepting `accepted.last()` at step `accepted.len() - 1`.
pub type RewardFn = Box<dyn Fn(&[Label], &[usize]) -> f64 + Sync>;

pub struct Mdp {
    pub features: Vec<Vec<f64>>,
    pub options: Vec<SpanOption>,
    pub reward: RewardFn,
}

impl Mdp {
    pub fn random(seed: u64, m: usize, scale: f64, reward: RewardFn) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let features = (0..POSITIONS)
            .map(|_| (0..3 * m).map(|_| rng.random_range(-scale..scale)).collect())
            .collect();
        let options = (0..3)
            .map(|j| SpanOption {
                start: j,
                end: j + 1,
                hidden_sum: (0..m).map(|_| rng.random_range(-scale..scale)).collect(),
                length: j + 1,
            })
            .collect();
        Mdp {
            features,
            options,
            reward,
        }
    }

    /// Plays `picks` (indices into the candidates still available) after `labels`.
    pub fn trajectory(&self, labels: &[Label], label_log_prob: f64, picks: &[usize]) -> Trajectory {
        let mut remaining: Vec<usize> = vec![0, 1, 2];
        let mut accepted = Vec::new();
        let mut record_steps = Vec::new();
        let mut steps = Vec::new();
        let mut rejected = None;
        let mut consumed = 0;
        for &k in picks {
            let options: Vec<SpanOption> = remaining.iter().map(|&c| self.options[c].clone()).collect();
            record_steps.push(SelectionRecord { options, chosen: k });
            let c = remaining[k];
            let length = self.options[c].length;
            if consumed + length > BUDGET {
                rejected = Some(Rejection {
                    candidate: c,
                    length,
                    log_prob: 0.0,
                });
                break;
            }
            consumed += length;
            accepted.push(c);
            steps.push(Step {
                candidate: c,
                granularity: Granularity::Word,
                length,
                score_before: 0.0,
                score_after: 0.0,
                similarity: 1.0,
                fluency: 1.0,
                reward: (self.reward)(labels, &accepted),
                log_prob: 0.0,
                consumed,
            });
            remaining.remove(k);
        }
        Trajectory {
            query_id: String::new(),
            doc_id: String::new(),
            labels: labels.to_vec(),
            label_log_prob,
            spans: Vec::new(),
            candidates: Vec::new(),
            steps,
            termination: if rejected.is_some() { Termination::BudgetOverflow } else { Termination::Exhausted },
            rejected,
            initial_score: 0.0,
            final_score: 0.0,
            final_tokens: Vec::new(),
            final_bounds: Vec::new(),
            record: DecisionRecord {
                features: self.features.clone(),
                labels: labels.to_vec(),
                steps: record_steps,
            },
        }
    }

    fn finished(&self, picks: &[usize]) -> bool {
        let t = self.trajectory(&[Label::N; POSITIONS], 0.0, picks);
        t.rejected.is_some() || picks.len() == self.options.len()
    }

    /// Every complete trajectory.
    pub fn enumerate(&self) -> Vec<Trajectory> {
        fn go(mdp: &Mdp, prefix: Vec<usize>, out: &mut Vec<Vec<usize>>) {
            if mdp.finished(&prefix) {
                out.push(prefix);
                return;
            }
            for k in 0..mdp.options.len() - prefix.len() {
                let mut p = prefix.clone();
                p.push(k);
                go(mdp, p, out);
            }
        }
        let mut seqs = Vec::new();
        go(self, Vec::new(), &mut seqs);
        let mut out = Vec::new();
        for code in 0..4usize.pow(POSITIONS as u32) {
            let labels: Vec<Label> = (0..POSITIONS).map(|i| Label::ALL[(code >> (2 * i)) & 3]).collect();
            for s in &seqs {
                out.push(self.trajectory(&labels, 0.0, s));
            }
        }
        out
    }

    /// `J = Σ_τ P(τ) R(τ)`.
    pub fn objective(&self, pols: &Policies) -> f64 {
        self.enumerate()
            .iter()
            .map(|t| log_prob(pols, &t.record).unwrap().exp() * t.total_return(GAMMA))
            .sum()
    }

    /// `Σ_τ P(τ) R(τ) ∇log P(τ)`.
    pub fn exact_gradient(&self, pols: &Policies) -> Vec<f64> {
        let mut grad = vec![0.0; pols.num_params()];
        for t in self.enumerate() {
            let p = log_prob(pols, &t.record).unwrap().exp();
            let ret = t.total_return(GAMMA);
            let g = log_prob_grad(pols, &t.record, ret, &vec![ret; t.record.steps.len()])
                .unwrap()
                .to_flat();
            for (a, b) in grad.iter_mut().zip(g) {
                *a += p * b;
            }
        }
        grad
    }

    /// Exact per-coordinate standard deviation of the single-episode estimate
    /// without a baseline.
    pub fn estimator_sd(&self, pols: &Policies) -> Vec<f64> {
        let n = pols.num_params();
        let (mut m1, mut m2) = (vec![0.0; n], vec![0.0; n]);
        for t in self.enumerate() {
            let p = log_prob(pols, &t.record).unwrap().exp();
            let g = estimate_gradient(pols, std::slice::from_ref(&t), GAMMA, 0.0).unwrap().to_flat();
            for k in 0..n {
                m1[k] += p * g[k];
                m2[k] += p * g[k] * g[k];
            }
        }
        m1.iter().zip(&m2).map(|(a, b)| (b - a * a).max(0.0).sqrt()).collect()
    }

    /// The most probable trajectory and its probability.
    pub fn mode(&self, pols: &Policies) -> (Trajectory, f64) {
        self.enumerate()
            .into_iter()
            .map(|t| {
                let p = log_prob(pols, &t.record).unwrap().exp();
                (t, p)
            })
            .max_by(|a, b| a.1.total_cmp(&b.1))
            .unwrap()
    }

    /// One episode sampled through the library's decision functions.
    pub fn sample(&self, pols: &Policies, rng: &mut ChaCha8Rng) -> Trajectory {
        let u = predict_from_features(&pols.indicator, &self.features);
        let (labels, label_log_prob) = label_positions(&u, DecisionMode::Sample, rng);
        let mut picks = Vec::new();
        while !self.finished(&picks) {
            let mut remaining: Vec<usize> = vec![0, 1, 2];
            for &k in &picks {
                remaining.remove(k);
            }
            let reps: Vec<Vec<f64>> = remaining
                .iter()
                .map(|&c| self.options[c].representation(&u.probs))
                .collect();
            let (k, _) = select_perturbation(&pols.aggregator, &reps, DecisionMode::Sample, rng).unwrap();
            picks.push(k);
        }
        self.trajectory(&labels, label_log_prob, &picks)
    }

    /// Mean of `n` single-episode estimates, computed in batches.
    pub fn monte_carlo(&self, pols: &Policies, n: usize, seed: u64) -> Vec<f64> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let batch = 1000;
        let mut mean = vec![0.0; pols.num_params()];
        for chunk in 0..n / batch {
            let trajs: Vec<Trajectory> = (0..batch).map(|_| self.sample(pols, &mut rng)).collect();
            let g = estimate_gradient(pols, &trajs, GAMMA, 0.0).unwrap().to_flat();
            for (a, b) in mean.iter_mut().zip(g) {
                *a += (b - *a) / (chunk + 1) as f64;
            }
        }
        mean
    }
}

/// Central differences of the exact objective.
pub fn objective_fd(mdp: &Mdp, pols: &Policies, h: f64) -> Vec<f64> {
    let base = pols.to_flat();
    (0..base.len())
        .map(|k| {
            let mut p = pols.clone();
            let mut v = base.clone();
            v[k] += h;
            p.set_flat(&v);
            let up = mdp.objective(&p);
            v[k] -= 2.0 * h;
            p.set_flat(&v);
            (up - mdp.objective(&p)) / (2.0 * h)
        })
        .collect()
}
