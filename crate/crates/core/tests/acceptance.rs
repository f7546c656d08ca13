//! Exit criteria for the attack pipeline, one test per criterion.
//!
//! Every test prints a single `criterion N ... PASS|FAIL` line. The tests
//! share one lock so that the runtime limits are measured without other
//! criteria competing for the CPU.

mod common;

use std::collections::BTreeMap;
use std::io::Write;
use std::path::Path;
use std::process::Command;
use std::sync::{Mutex, MutexGuard, OnceLock};
use std::time::{Duration, Instant};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use common::world::small_world;
use common::Mdp;
use rankattack::agents::{
    decode_spans, induce_labels, log_prob, log_prob_grad, DecisionMode, DecisionRecord, Label, Policies, PolicyConfig,
    SelectionRecord, SpanOption,
};
use rankattack::attacks::{AttackTables, Granularity};
use rankattack::bench::{Benchmark, BenchmarkConfig, QueryShift};
use rankattack::corpus::{Document, Query};
use rankattack::env::{
    step_reward, train, AttackerConfig, EpisodeInput, Environment, NaturalnessOracle, RewardConfig, Termination,
    DEFAULT_BETA, DEFAULT_XI,
};
use rankattack::eval::{
    compute_metrics, ranked_lists, run_attacks, run_mode, screen_outcomes, select_targets,
    target_inputs, AttackMode, AttackOutcome, AttackTarget, BlackBox, Difficulty, DEFAULT_KS, DEFAULT_SPAM_WINDOW,
};
use rankattack::ranker::{ranking_agreement, NeuralRanker, RankedList, RankerConfig};

fn serial() -> MutexGuard<'static, ()> {
    static LOCK: Mutex<()> = Mutex::new(());
    LOCK.lock().unwrap_or_else(|e| e.into_inner())
}

fn verdict(n: usize, name: &str, pass: bool, detail: &str) {
    // written to the process stderr directly so the line survives output capture
    let line = format!(
        "criterion {n:>2} {name:<28} {}  {detail}\n",
        if pass { "PASS" } else { "FAIL" }
    );
    let _ = std::io::stderr().write_all(line.as_bytes());
}

fn secs(d: Duration) -> String {
    format!("{:.2}s", d.as_secs_f64())
}

// ---------------------------------------------------------------------------
// 1. reward

#[test]
fn criterion_01_reward_exactness() {
    let _g = serial();
    let start = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let mut worst = 0.0f64;
    let mut decreases = 0;
    let mut penalty_exact = true;
    for _ in 0..1000 {
        let prev: f64 = rng.random_range(-5.0..5.0);
        let cur = if rng.random_bool(0.3) { prev - rng.random_range(1e-9..3.0) } else { prev + rng.random_range(0.0..3.0) };
        let plen: usize = rng.random_range(1..=10);
        let sim: f64 = rng.random_range(0.0..=1.0);
        let flu: f64 = rng.random_range(0.0..=1.0);
        let cfg = RewardConfig {
            xi: rng.random_range(0.0..5.0),
            beta: rng.random_range(0.0..2.0),
            ..RewardConfig::default()
        };
        let got = step_reward(&cfg, prev, cur, plen, sim, flu).unwrap();
        if cur < prev {
            decreases += 1;
            penalty_exact &= got == -cfg.xi;
        } else {
            let want = (cur - prev) / plen as f64 + cfg.beta * (sim + flu);
            worst = worst.max((got - want).abs());
        }
    }
    let defaults = RewardConfig::default();
    let defaults_ok = defaults.xi == 1.0 && defaults.beta == 0.2 && DEFAULT_XI == 1.0 && DEFAULT_BETA == 0.2;
    let elapsed = start.elapsed();
    let pass = worst <= 1e-12 && penalty_exact && decreases > 0 && defaults_ok && elapsed < Duration::from_secs(1);
    verdict(
        1,
        "reward exactness",
        pass,
        &format!("max abs err {worst:.1e}, {decreases} decreases exact {penalty_exact}, defaults {defaults_ok}, {}", secs(elapsed)),
    );
    assert!(pass);
}

// ---------------------------------------------------------------------------
// 2. budget

#[test]
fn criterion_02_budget_and_termination() {
    let _g = serial();
    let start = Instant::now();
    let world = small_world(21);
    let oracle = NaturalnessOracle::local(&world.surrogate, &world.lm);
    let env = Environment {
        surrogate: &world.surrogate,
        lm: &world.lm,
        tables: &world.tables,
        oracle: &oracle,
        reward: RewardConfig {
            budget: 25,
            ..RewardConfig::default()
        },
        generator: Default::default(),
    };
    let docs = world.corpus.docs();
    let policies: Vec<Policies> = (0..20)
        .map(|s| Policies::random(8, &PolicyConfig { hidden: 8, seed: s }))
        .collect();
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let (mut traces, mut violations, mut rejections) = (0usize, 0usize, 0usize);
    let mut terminations: BTreeMap<String, usize> = BTreeMap::new();
    while traces < 10_000 {
        let q = &world.queries[rng.random_range(0..world.queries.len())];
        let d = rng.random_range(0..docs.len());
        let others: Vec<&Document> = (1..=3).map(|k| &docs[(d + k) % docs.len()]).collect();
        let input = EpisodeInput {
            query: q,
            doc: &docs[d],
            others,
        };
        let pols = &policies[traces % policies.len()];
        let traj = if traces % 2 == 0 {
            env.run_episode(pols, &input, DecisionMode::Sample, &mut rng).unwrap()
        } else {
            run_mode(&env, pols, &input, AttackMode::Random, &mut rng).unwrap()
        };
        let spent: usize = traj.steps.iter().map(|s| s.length).sum();
        let mut ok = spent <= 25 && traj.budget_used() == spent;
        if let Some(r) = &traj.rejected {
            rejections += 1;
            ok &= spent + r.length > 25 && traj.termination == Termination::BudgetOverflow;
        }
        violations += usize::from(!ok);
        *terminations.entry(format!("{:?}", traj.termination)).or_default() += 1;
        traces += 1;
    }
    let elapsed = start.elapsed();
    let pass = violations == 0 && rejections > 0 && elapsed < Duration::from_secs(10);
    verdict(
        2,
        "budget and termination",
        pass,
        &format!("{traces} traces, {violations} violations, {rejections} rejections, {terminations:?}, {}", secs(elapsed)),
    );
    assert!(pass);
}

// ---------------------------------------------------------------------------
// 3. gradients

fn rel_err(fd: f64, an: f64) -> f64 {
    (fd - an).abs() / fd.abs().max(an.abs()).max(1e-8)
}

#[test]
fn criterion_03_gradient_fidelity() {
    let _g = serial();
    let start = Instant::now();
    let h = 1e-5;
    let world = small_world(33);
    let docs = world.corpus.docs();
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let (mut score_worst, mut loss_worst, mut policy_worst) = (0.0f64, 0.0f64, 0.0f64);

    // surrogate score and pairwise loss with respect to position embeddings
    let mut draws = 0;
    while draws < 100 {
        let model = NeuralRanker::random(world.corpus.vocab.len(), RankerConfig { dim: 6, hidden: 8 }, rng.random());
        let q = &world.queries[rng.random_range(0..world.queries.len())];
        let d = &docs[rng.random_range(0..docs.len())];
        let others: Vec<&Document> = (0..4).map(|_| &docs[rng.random_range(0..docs.len())]).collect();
        let qv = model.embed(&q.tokens);
        let dv = model.embed(&d.tokens);
        let other_scores: Vec<f64> = others.iter().map(|o| model.score(q, o).unwrap()).collect();
        let hinge = |x: &[f64]| -> f64 {
            let s = model.score_embedded(&qv, x).unwrap();
            other_scores.iter().map(|so| (1.0 - s + so).max(0.0)).sum::<f64>() / others.len() as f64
        };
        let s0 = model.score_embedded(&qv, &dv).unwrap();
        if other_scores.iter().any(|so| (1.0 - s0 + so).abs() < 1e-3) {
            continue;
        }
        draws += 1;
        let gs = model.score_position_gradients(q, d).unwrap();
        let gl = model.doc_token_gradients(q, d, &others).unwrap();
        let m = model.dim();
        let i = rng.random_range(0..d.len());
        for k in 0..m {
            let mut up = dv.clone();
            up[i * m + k] += h;
            let mut down = dv.clone();
            down[i * m + k] -= h;
            let fd = (model.score_embedded(&qv, &up).unwrap() - model.score_embedded(&qv, &down).unwrap()) / (2.0 * h);
            score_worst = score_worst.max(rel_err(fd, gs.position(i)[k]));
            let fd = (hinge(&up) - hinge(&down)) / (2.0 * h);
            loss_worst = loss_worst.max(rel_err(fd, gl.position(i)[k]));
        }
    }

    // policy gradient of a weighted log-probability of recorded decisions
    for draw in 0..100u64 {
        let m = 3;
        let pols = Policies::random(m, &PolicyConfig { hidden: 5, seed: draw });
        let l = rng.random_range(4..12);
        let features: Vec<Vec<f64>> = (0..l).map(|_| (0..3 * m).map(|_| rng.random_range(-1.0..1.0)).collect()).collect();
        let labels: Vec<Label> = (0..l).map(|_| Label::ALL[rng.random_range(0..4)]).collect();
        let steps: Vec<SelectionRecord> = (0..rng.random_range(1..4))
            .map(|_| {
                let options: Vec<SpanOption> = (0..rng.random_range(1..5))
                    .map(|_| {
                        let s = rng.random_range(0..l);
                        let e = rng.random_range(s + 1..=l);
                        SpanOption {
                            start: s,
                            end: e,
                            hidden_sum: (0..m).map(|_| rng.random_range(-1.0..1.0)).collect(),
                            length: rng.random_range(1..6),
                        }
                    })
                    .collect();
                SelectionRecord {
                    chosen: rng.random_range(0..options.len()),
                    options,
                }
            })
            .collect();
        let weights: Vec<f64> = steps.iter().map(|_| rng.random_range(-2.0..2.0)).collect();
        let label_weight: f64 = rng.random_range(-2.0..2.0);
        let rec = DecisionRecord { features, labels, steps };
        let objective = |p: &Policies| {
            let (lab, st) = rankattack::agents::log_prob_parts(p, &rec).unwrap();
            label_weight * lab + st.iter().zip(&weights).map(|(a, b)| a * b).sum::<f64>()
        };
        let grad = log_prob_grad(&pols, &rec, label_weight, &weights).unwrap().to_flat();
        let base = pols.to_flat();
        let k = rng.random_range(0..base.len());
        let mut p = pols.clone();
        let mut v = base.clone();
        v[k] += h;
        p.set_flat(&v);
        let up = objective(&p);
        v[k] -= 2.0 * h;
        p.set_flat(&v);
        let fd = (up - objective(&p)) / (2.0 * h);
        policy_worst = policy_worst.max(rel_err(fd, grad[k]));
    }
    let elapsed = start.elapsed();
    let pass = score_worst <= 1e-4 && loss_worst <= 1e-4 && policy_worst <= 1e-4 && elapsed < Duration::from_secs(30);
    verdict(
        3,
        "gradient fidelity",
        pass,
        &format!(
            "max rel err score {score_worst:.1e}, loss {loss_worst:.1e}, policy {policy_worst:.1e}, {}",
            secs(elapsed)
        ),
    );
    assert!(pass);
}

// ---------------------------------------------------------------------------
// 4. REINFORCE on an enumerable MDP
//
// A peaked policy and a single rewarded trajectory: the estimate is then a
// fixed vector with probability P and zero otherwise, so every coordinate has
// the same relative standard error sqrt((1 - P) / (P n)) and a 2% bound is a
// meaningful test of bias rather than of luck.

const MDP_SAMPLES: usize = 100_000;

fn peaked_policies(seed: u64, sharpness: f64) -> Policies {
    let mut pols = Policies::random(2, &PolicyConfig { hidden: 3, seed });
    // favour one label everywhere and sharpen the candidate preferences
    pols.indicator.net.b2[Label::P.index()] += sharpness;
    for w in &mut pols.aggregator.net.w2 {
        *w *= 2.0 * sharpness;
    }
    pols
}

/// The MDP rewarding only the most probable trajectory that accepts two candidates.
fn single_reward_mdp(pols: &Policies) -> (Mdp, f64) {
    let mut mdp = Mdp::random(44, 2, 1.0, Box::new(|_, _| 0.0));
    let (star, p) = mdp
        .enumerate()
        .into_iter()
        .filter(|t| t.steps.len() == 2)
        .map(|t| {
            let p = log_prob(pols, &t.record).unwrap().exp();
            (t, p)
        })
        .max_by(|a, b| a.1.total_cmp(&b.1))
        .unwrap();
    let labels = star.labels.clone();
    let accepted: Vec<usize> = star.steps.iter().map(|s| s.candidate).collect();
    mdp.reward = Box::new(move |l, a| if l == labels.as_slice() && a == accepted.as_slice() { 2.0 } else { 0.0 });
    (mdp, p)
}

#[test]
fn criterion_04_reinforce_unbiasedness() {
    let _g = serial();
    let start = Instant::now();
    let pols = peaked_policies(404, 6.0);
    let (mdp, p_star) = single_reward_mdp(&pols);
    let exact = mdp.exact_gradient(&pols);
    let fd = common::objective_fd(&mdp, &pols, 1e-5);
    let fd_worst = exact.iter().zip(&fd).map(|(a, b)| (a - b).abs()).fold(0.0f64, f64::max);

    let mc = mdp.monte_carlo(&pols, MDP_SAMPLES, 4);
    // coordinates whose exact gradient vanishes identically (the softmax is
    // shift invariant in the aggregator's output bias) have no relative error
    let structural: Vec<usize> = (0..exact.len()).filter(|&k| exact[k].abs() < 1e-12).collect();
    let zeros_ok = structural.iter().all(|&k| mc[k].abs() < 1e-9);
    let mc_worst = (0..exact.len())
        .filter(|k| !structural.contains(k))
        .map(|k| (mc[k] - exact[k]).abs() / exact[k].abs())
        .fold(0.0f64, f64::max);
    let expected_se = ((1.0 - p_star) / (p_star * MDP_SAMPLES as f64)).sqrt();
    let elapsed = start.elapsed();
    let pass = mc_worst <= 0.02 && zeros_ok && fd_worst <= 1e-5 && elapsed < Duration::from_secs(120);
    verdict(
        4,
        "REINFORCE unbiasedness",
        pass,
        &format!(
            "{} coords ({} identically zero), P(rewarded) {p_star:.3}, MC max rel err {:.2}% (se {:.2}%), exact vs FD max abs err {fd_worst:.1e}, {}",
            exact.len(),
            structural.len(),
            100.0 * mc_worst,
            100.0 * expected_se,
            secs(elapsed)
        ),
    );
    assert!(pass);
}

// ---------------------------------------------------------------------------
// 5. span decoding

#[test]
fn criterion_05_span_constraints() {
    let _g = serial();
    let start = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let mut failures = 0;
    let mut spans_seen = 0;
    for _ in 0..10_000 {
        let l = rng.random_range(1..120);
        let labels: Vec<Label> = if rng.random_bool(0.5) {
            (0..l).map(|_| Label::ALL[rng.random_range(0..4)]).collect()
        } else {
            // long runs stress the length windows
            let mut v = Vec::with_capacity(l);
            while v.len() < l {
                let lab = Label::ALL[rng.random_range(0..4)];
                let run = rng.random_range(1..15).min(l - v.len());
                v.extend(std::iter::repeat_n(lab, run));
            }
            v
        };
        let mut bounds = Vec::new();
        let mut s = 0;
        while s < l {
            let e = (s + rng.random_range(1..20)).min(l);
            bounds.push((s, e));
            s = e;
        }
        let spans = decode_spans(&labels, &bounds);
        spans_seen += spans.len();
        let disjoint = spans.windows(2).all(|w| w[0].end <= w[1].start);
        let windows = spans.iter().all(|s| {
            let n = s.end - s.start;
            match s.granularity {
                Granularity::Word => n == 1,
                Granularity::Phrase => (2..=5).contains(&n),
                Granularity::Sentence => (6..=10).contains(&n),
            }
        });
        let in_bounds = spans.iter().all(|s| s.start < s.end && s.end <= l);
        let again = decode_spans(&induce_labels(&spans, l), &bounds);
        if !(disjoint && windows && in_bounds && again == spans) {
            failures += 1;
        }
    }
    let elapsed = start.elapsed();
    let pass = failures == 0 && elapsed < Duration::from_secs(10);
    verdict(
        5,
        "span constraints",
        pass,
        &format!("10000 sequences, {spans_seen} spans, {failures} failures, {}", secs(elapsed)),
    );
    assert!(pass);
}

// ---------------------------------------------------------------------------
// 6. metrics

#[test]
fn criterion_06_metrics_oracle() {
    let _g = serial();
    let start = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(6);
    let mut mismatches = 0;
    for _ in 0..1000 {
        let n = rng.random_range(1..200);
        let outcomes: Vec<AttackOutcome> = (0..n)
            .map(|i| AttackOutcome {
                query_id: format!("q{}", i % 7),
                doc_id: format!("d{i}"),
                rank_before: rng.random_range(1..=100),
                rank_after: rng.random_range(1..=100),
                budget: rng.random_range(0..=25),
                counts: [0; 3],
                mode: "full".into(),
                adversarial_text: String::new(),
            })
            .collect();
        let ks = [1, 5, 10, 50];
        let got = compute_metrics(&outcomes, &ks).unwrap();

        let mut moved_up = 0i64;
        let mut boost = 0i64;
        let mut budget = 0i64;
        let mut top = [0i64; 4];
        for o in &outcomes {
            let (b, a) = (o.rank_before as i64, o.rank_after as i64);
            if a < b {
                moved_up += 1;
            }
            boost += b - a;
            budget += o.budget as i64;
            for (j, &k) in ks.iter().enumerate() {
                if a <= k as i64 {
                    top[j] += 1;
                }
            }
        }
        let nf = n as f64;
        let ok = got.n == n
            && got.asr == 100.0 * moved_up as f64 / nf
            && got.boost == boost as f64 / nf
            && got.mean_budget == budget as f64 / nf
            && got.top_k.len() == ks.len()
            && ks
                .iter()
                .zip(&top)
                .zip(&got.top_k)
                .all(|((&k, &c), &(gk, gv))| gk == k && gv == 100.0 * c as f64 / nf);
        mismatches += usize::from(!ok);
    }
    let elapsed = start.elapsed();
    let pass = mismatches == 0 && elapsed < Duration::from_secs(5);
    verdict(6, "metrics oracle", pass, &format!("1000 outcome sets, {mismatches} mismatches, {}", secs(elapsed)));
    assert!(pass);
}

// ---------------------------------------------------------------------------
// shared benchmark for 7 to 9

struct Fixture {
    bench: Benchmark,
    surrogate: NeuralRanker,
    tables: AttackTables,
    iid_tau: f64,
    ood_tau: f64,
    build_time: Duration,
}

fn fixture() -> &'static Fixture {
    static F: OnceLock<Fixture> = OnceLock::new();
    F.get_or_init(|| {
        let start = Instant::now();
        let bench = Benchmark::build(&BenchmarkConfig::with_seed(7)).unwrap();
        let eval = bench.data.eval_queries();
        let n = bench.data.corpus.len();
        let iid = bench.distill(QueryShift::Iid).unwrap();
        let iid_tau = ranking_agreement(&iid.surrogate, &bench.target, &eval, &bench.data.corpus, n).unwrap();
        let ood = bench.distill(QueryShift::Ood).unwrap();
        let ood_tau = ranking_agreement(&ood.surrogate, &bench.target, &eval, &bench.data.corpus, n).unwrap();
        let tables = bench.data.tables(3);
        Fixture {
            surrogate: iid.surrogate,
            tables,
            iid_tau,
            ood_tau,
            build_time: start.elapsed(),
            bench,
        }
    })
}

struct AttackSetup {
    train_queries: Vec<Query>,
    train_lists: Vec<RankedList>,
    train_targets: Vec<AttackTarget>,
    eval_queries: Vec<Query>,
    eval_lists: Vec<RankedList>,
    mixture: Vec<AttackTarget>,
    easy: Vec<AttackTarget>,
}

/// Training targets from the distillation queries; 50 Mixture and 50 Easy
/// evaluation targets from the first ten held-out queries.
fn attack_setup() -> &'static AttackSetup {
    static S: OnceLock<AttackSetup> = OnceLock::new();
    S.get_or_init(|| {
        let f = fixture();
        let data = &f.bench.data;
        let train_queries = data.distill_queries(QueryShift::Iid);
        let train_lists = ranked_lists(&f.bench.target, &train_queries, &data.corpus).unwrap();
        let eval_queries: Vec<Query> = data.eval_queries().into_iter().take(10).collect();
        let eval_lists = ranked_lists(&f.bench.target, &eval_queries, &data.corpus).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let train_targets = select_targets(&train_lists, Difficulty::Mixture, 5, &mut rng).unwrap();
        let mixture = select_targets(&eval_lists, Difficulty::Mixture, 5, &mut rng).unwrap();
        let easy = select_targets(&eval_lists, Difficulty::Easy, 5, &mut rng).unwrap();
        AttackSetup {
            train_queries,
            train_lists,
            train_targets,
            eval_queries,
            eval_lists,
            mixture,
            easy,
        }
    })
}

fn environment(f: &'static Fixture, beta: f64) -> Environment<'static> {
    static ORACLE: OnceLock<NaturalnessOracle<'static>> = OnceLock::new();
    let oracle = ORACLE.get_or_init(|| NaturalnessOracle::local(&f.surrogate, &f.bench.data.lm));
    Environment {
        surrogate: &f.surrogate,
        lm: &f.bench.data.lm,
        tables: &f.tables,
        oracle,
        reward: RewardConfig {
            beta,
            ..RewardConfig::default()
        },
        generator: Default::default(),
    }
}

/// Policies trained with the default attacker settings at naturalness weight `beta`.
fn trained(beta: f64) -> (Policies, Duration) {
    static CACHE: Mutex<Vec<(u64, Policies, Duration)>> = Mutex::new(Vec::new());
    if let Some((_, p, d)) = CACHE.lock().unwrap().iter().find(|(b, _, _)| *b == beta.to_bits()) {
        return (p.clone(), *d);
    }
    let start = Instant::now();
    let f = fixture();
    let s = attack_setup();
    let env = environment(f, beta);
    let inputs = target_inputs(&f.bench.data.corpus, &s.train_queries, &s.train_lists, &s.train_targets).unwrap();
    let mut pols = Policies::random(f.surrogate.dim(), &PolicyConfig::default());
    train(&env, &mut pols, &inputs, &AttackerConfig::default(), None).unwrap();
    let took = start.elapsed();
    CACHE.lock().unwrap().push((beta.to_bits(), pols.clone(), took));
    (pols, took)
}

fn attack(beta: f64, pols: &Policies, targets: &[AttackTarget], mode: AttackMode) -> Vec<AttackOutcome> {
    let f = fixture();
    let s = attack_setup();
    let env = environment(f, beta);
    let black_box = BlackBox {
        target: &f.bench.target,
        corpus: &f.bench.data.corpus,
    };
    run_attacks(&env, pols, &black_box, &s.eval_queries, &s.eval_lists, targets, mode, 5).unwrap()
}

// ---------------------------------------------------------------------------
// 7. distillation

#[test]
fn criterion_07_surrogate_distillation() {
    let _g = serial();
    let f = fixture();
    let pass = f.iid_tau > 0.5 && f.ood_tau < f.iid_tau && f.build_time < Duration::from_secs(300);
    verdict(
        7,
        "surrogate distillation",
        pass,
        &format!("tau iid {:.4}, ood {:.4}, {}", f.iid_tau, f.ood_tau, secs(f.build_time)),
    );
    assert!(pass);
}

// ---------------------------------------------------------------------------
// 8. efficacy

#[test]
fn criterion_08_attack_efficacy() {
    let _g = serial();
    let start = Instant::now();
    let f = fixture();
    let s = attack_setup();
    let (pols, train_time) = trained(DEFAULT_BETA);
    let boost = |mode: AttackMode| compute_metrics(&attack(DEFAULT_BETA, &pols, &s.mixture, mode), &DEFAULT_KS).unwrap().boost;
    let full = boost(AttackMode::Full);
    let others: Vec<(AttackMode, f64)> = AttackMode::ALL
        .iter()
        .filter(|m| !matches!(m, AttackMode::Full | AttackMode::Triple))
        .map(|&m| (m, boost(m)))
        .collect();
    let easy_asr = compute_metrics(&attack(DEFAULT_BETA, &pols, &s.easy, AttackMode::Full), &DEFAULT_KS)
        .unwrap()
        .asr;
    let elapsed = f.build_time + train_time + start.elapsed();
    let beaten: Vec<String> = others
        .iter()
        .filter(|(_, b)| full <= *b)
        .map(|(m, b)| format!("{m} {b:.2}"))
        .collect();
    let pass = beaten.is_empty() && easy_asr >= 90.0 && elapsed < Duration::from_secs(600);
    let table: Vec<String> = others.iter().map(|(m, b)| format!("{m} {b:.2}")).collect();
    verdict(
        8,
        "attack efficacy",
        pass,
        &format!(
            "{} mixture targets, full boost {full:.2} vs [{}], not exceeded: [{}], easy ASR {easy_asr:.2}%, {}",
            s.mixture.len(),
            table.join(", "),
            beaten.join(", "),
            secs(elapsed)
        ),
    );
    assert!(pass);
}

// ---------------------------------------------------------------------------
// 9. naturalness trade-off

#[test]
fn criterion_09_naturalness_tradeoff() {
    let _g = serial();
    let start = Instant::now();
    let f = fixture();
    let s = attack_setup();
    let mut rows = Vec::new();
    for beta in [0.0, 0.2, 1.0] {
        let (pols, _) = trained(beta);
        let outcomes = attack(beta, &pols, &s.mixture, AttackMode::Full);
        let m = compute_metrics(&outcomes, &DEFAULT_KS).unwrap();
        let sc = screen_outcomes(&outcomes, &f.bench.data.corpus, &s.eval_queries, &f.bench.data.lm, &[0.1], DEFAULT_SPAM_WINDOW)
            .unwrap();
        rows.push((beta, m.boost, sc.mean_spamicity, sc.mean_ppl_ratio));
    }
    let elapsed = start.elapsed();
    let non_increasing = |k: fn(&(f64, f64, f64, f64)) -> f64| rows.windows(2).all(|w| k(&w[1]) <= k(&w[0]));
    let boost_ok = non_increasing(|r| r.1);
    let spam_ok = non_increasing(|r| r.2);
    let ppl_ok = non_increasing(|r| r.3);
    let pass = boost_ok && spam_ok && ppl_ok && elapsed < Duration::from_secs(900);
    let table: Vec<String> = rows
        .iter()
        .map(|(b, boost, spam, ppl)| format!("beta {b}: boost {boost:.2} spam {spam:.4} pplx {ppl:.3}"))
        .collect();
    verdict(
        9,
        "naturalness trade-off",
        pass,
        &format!(
            "{}; monotone boost {boost_ok} spam {spam_ok} ppl {ppl_ok}, {}",
            table.join("; "),
            secs(elapsed)
        ),
    );
    assert!(pass);
}

// ---------------------------------------------------------------------------
// 10. determinism

const SMALL_RUN: &str = "\
n_docs = 120
vocab_size = 500
n_target_queries = 30
n_distill_queries = 4
n_eval_queries = 3
query_pool = 20
target_epochs = 30
distill_epochs = 20
distill_depth = 120
epochs = 2
batch_size = 4
train_targets_per_query = 2
targets_per_query = 2
";

fn run_pipeline(dir: &Path) -> BTreeMap<String, Vec<u8>> {
    let mut cfg = rankattack::config::Config::default_config();
    for line in SMALL_RUN.lines() {
        let (k, v) = line.split_once('=').unwrap();
        cfg.set(k.trim(), v.trim());
    }
    cfg.set("workdir", dir.join("work").to_str().unwrap());
    let conf = dir.join("run.conf");
    std::fs::write(&conf, cfg.to_text()).unwrap();
    let bin = env!("CARGO_BIN_EXE_rankattack");
    for stage in ["gen-corpus", "train-target", "distill-surrogate", "train-attacker", "attack", "evaluate", "report"] {
        let out = Command::new(bin).arg(stage).arg("--config").arg(&conf).output().unwrap();
        assert!(out.status.success(), "{stage}: {}", String::from_utf8_lossy(&out.stderr));
    }
    let mut files = BTreeMap::new();
    for entry in std::fs::read_dir(dir.join("work")).unwrap() {
        let p = entry.unwrap().path();
        files.insert(p.file_name().unwrap().to_string_lossy().into_owned(), std::fs::read(&p).unwrap());
    }
    files
}

#[test]
fn criterion_10_determinism() {
    let _g = serial();
    let start = Instant::now();
    let a = tempfile::tempdir().unwrap();
    let b = tempfile::tempdir().unwrap();
    let first = run_pipeline(a.path());
    let second = run_pipeline(b.path());
    let differing: Vec<&String> = first.keys().filter(|k| first.get(*k) != second.get(*k)).collect();
    let required = ["outcomes.jsonl", "report.json", "report.txt"];
    let present = required.iter().all(|r| first.contains_key(*r));
    let pass = differing.is_empty() && first.len() == second.len() && present;
    verdict(
        10,
        "determinism",
        pass,
        &format!("{} files compared, differing {differing:?}, {}", first.len(), secs(start.elapsed())),
    );
    assert!(pass);
}

