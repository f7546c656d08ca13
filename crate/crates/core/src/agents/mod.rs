//! The two cooperating policies: a per-position vulnerability indicator that
//! labels tokens with a perturbation granularity, and an aggregator that picks
//! which candidate perturbation to apply next.

mod decode;
mod gradient;

use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

pub use decode::{decode_spans, induce_labels};
pub use gradient::{log_prob, log_prob_grad, log_prob_parts, DecisionRecord, SelectionRecord, SpanOption};

use crate::attacks::{Granularity, PerturbationSpan};
use crate::error::{Error, Result};
use crate::linalg::{argmax, axpy, log_softmax, norm, softmax, Activation, Mlp};
use crate::ranker::{push_mlp, take_mlp, Checkpoint, GradientMatrix};

pub const N_LABELS: usize = 4;
pub const DEFAULT_POLICY_HIDDEN: usize = 16;

/// Per-position granularity label; `N` means "leave alone".
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Label {
    W,
    P,
    S,
    N,
}

impl Label {
    pub const ALL: [Label; N_LABELS] = [Label::W, Label::P, Label::S, Label::N];

    pub fn index(self) -> usize {
        self as usize
    }

    pub fn granularity(self) -> Option<Granularity> {
        match self {
            Label::W => Some(Granularity::Word),
            Label::P => Some(Granularity::Phrase),
            Label::S => Some(Granularity::Sentence),
            Label::N => None,
        }
    }
}

impl From<Granularity> for Label {
    fn from(g: Granularity) -> Self {
        match g {
            Granularity::Word => Label::W,
            Granularity::Phrase => Label::P,
            Granularity::Sentence => Label::S,
        }
    }
}

/// Stochastic during training, greedy at evaluation.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum DecisionMode {
    Sample,
    Argmax,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct PolicyConfig {
    pub hidden: usize,
    pub seed: u64,
}

impl Default for PolicyConfig {
    fn default() -> Self {
        PolicyConfig {
            hidden: DEFAULT_POLICY_HIDDEN,
            seed: 3003,
        }
    }
}

/// `3m → hidden (tanh) → 4` logits per position.
#[derive(Clone, Debug, PartialEq)]
pub struct IndicatorPolicy {
    pub net: Mlp,
}

/// `m + 4 → hidden (tanh) → 1` logit per span representation.
#[derive(Clone, Debug, PartialEq)]
pub struct AggregatorPolicy {
    pub net: Mlp,
}

impl IndicatorPolicy {
    pub fn zeros(dim: usize, hidden: usize) -> Self {
        IndicatorPolicy {
            net: Mlp::zeros(3 * dim, hidden, N_LABELS, Activation::Tanh),
        }
    }

    pub fn dim(&self) -> usize {
        self.net.input / 3
    }
}

impl AggregatorPolicy {
    pub fn zeros(dim: usize, hidden: usize) -> Self {
        AggregatorPolicy {
            net: Mlp::zeros(dim + N_LABELS, hidden, 1, Activation::Tanh),
        }
    }

    pub fn logit(&self, rep: &[f64]) -> f64 {
        self.net.forward(rep).out[0]
    }
}

/// Both agents, optimized jointly.
#[derive(Clone, Debug, PartialEq)]
pub struct Policies {
    pub indicator: IndicatorPolicy,
    pub aggregator: AggregatorPolicy,
}

impl Policies {
    pub fn zeros(dim: usize, hidden: usize) -> Self {
        Policies {
            indicator: IndicatorPolicy::zeros(dim, hidden),
            aggregator: AggregatorPolicy::zeros(dim, hidden),
        }
    }

    pub fn random(dim: usize, cfg: &PolicyConfig) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
        Policies {
            indicator: IndicatorPolicy {
                net: Mlp::random(3 * dim, cfg.hidden, N_LABELS, Activation::Tanh, &mut rng),
            },
            aggregator: AggregatorPolicy {
                net: Mlp::random(dim + N_LABELS, cfg.hidden, 1, Activation::Tanh, &mut rng),
            },
        }
    }

    pub fn dim(&self) -> usize {
        self.indicator.dim()
    }

    pub fn zeros_like(&self) -> Self {
        Policies {
            indicator: IndicatorPolicy {
                net: self.indicator.net.zeros_like(),
            },
            aggregator: AggregatorPolicy {
                net: self.aggregator.net.zeros_like(),
            },
        }
    }

    pub fn num_params(&self) -> usize {
        self.indicator.net.num_params() + self.aggregator.net.num_params()
    }

    /// Indicator parameters followed by aggregator parameters.
    pub fn to_flat(&self) -> Vec<f64> {
        let mut v = self.indicator.net.to_flat();
        v.extend(self.aggregator.net.to_flat());
        v
    }

    pub fn set_flat(&mut self, flat: &[f64]) {
        let n = self.indicator.net.num_params();
        self.indicator.net.set_flat(&flat[..n]);
        self.aggregator.net.set_flat(&flat[n..]);
    }

    pub fn add_scaled(&mut self, other: &Policies, scale: f64) {
        self.indicator.net.add_scaled(&other.indicator.net, scale);
        self.aggregator.net.add_scaled(&other.aggregator.net, scale);
    }

    pub fn sq_norm(&self) -> f64 {
        self.indicator.net.sq_norm() + self.aggregator.net.sq_norm()
    }

    pub fn is_finite(&self) -> bool {
        self.indicator.net.is_finite() && self.aggregator.net.is_finite()
    }

    pub fn to_checkpoint(&self, config_hash: &str) -> Checkpoint {
        let mut ck = Checkpoint::new("policies", config_hash);
        push_mlp(&mut ck, "indicator", &self.indicator.net);
        push_mlp(&mut ck, "aggregator", &self.aggregator.net);
        ck
    }

    pub fn from_checkpoint(ck: &Checkpoint) -> Result<Self> {
        ck.expect_kind("policies")?;
        let indicator = IndicatorPolicy {
            net: take_mlp(ck, "indicator", Activation::Tanh)?,
        };
        let aggregator = AggregatorPolicy {
            net: take_mlp(ck, "aggregator", Activation::Tanh)?,
        };
        if indicator.net.output != N_LABELS
            || indicator.net.input % 3 != 0
            || aggregator.net.input != indicator.net.input / 3 + N_LABELS
            || aggregator.net.output != 1
        {
            return Err(Error::Checkpoint("policy shapes are inconsistent".into()));
        }
        Ok(Policies { indicator, aggregator })
    }
}

/// Indicator input per position: the unit-normalized loss gradient, the
/// token embedding, and a 3-window mean of their elementwise product.
///
/// With mean pooling every position receives the same gradient, so the
/// product term is what makes the input position-specific.
pub fn indicator_features(g: &GradientMatrix, emb: &[Vec<f64>]) -> Result<Vec<Vec<f64>>> {
    let l = emb.len();
    if g.len() != l {
        return Err(Error::ShapeMismatch(format!("gradient has {} positions, embeddings {l}", g.len())));
    }
    if l == 0 {
        return Err(Error::EmptySequence);
    }
    let m = g.dim();
    if emb.iter().any(|e| e.len() != m) {
        return Err(Error::ShapeMismatch(format!("embedding width differs from {m}")));
    }
    let unit: Vec<Vec<f64>> = (0..l)
        .map(|i| {
            let gi = g.position(i);
            let n = norm(gi);
            if n > 0.0 {
                gi.iter().map(|v| v / n).collect()
            } else {
                vec![0.0; m]
            }
        })
        .collect();
    let prod: Vec<Vec<f64>> = (0..l)
        .map(|i| unit[i].iter().zip(&emb[i]).map(|(a, b)| a * b).collect())
        .collect();
    Ok((0..l)
        .map(|i| {
            let lo = i.saturating_sub(1);
            let hi = (i + 1).min(l - 1);
            let mut window = vec![0.0; m];
            for p in &prod[lo..=hi] {
                axpy(1.0 / (hi - lo + 1) as f64, p, &mut window);
            }
            let mut f = Vec::with_capacity(3 * m);
            f.extend_from_slice(&unit[i]);
            f.extend_from_slice(&emb[i]);
            f.extend(window);
            f
        })
        .collect())
}

/// The indicator output `u`: logits and softmax confidences per position.
#[derive(Clone, Debug, PartialEq)]
pub struct VulnerabilityDistribution {
    pub logits: Vec<[f64; N_LABELS]>,
    pub probs: Vec<[f64; N_LABELS]>,
}

impl VulnerabilityDistribution {
    pub fn from_logits(logits: Vec<[f64; N_LABELS]>) -> Self {
        let probs = logits
            .iter()
            .map(|z| {
                let p = softmax(z);
                [p[0], p[1], p[2], p[3]]
            })
            .collect();
        VulnerabilityDistribution { logits, probs }
    }

    pub fn len(&self) -> usize {
        self.probs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.probs.is_empty()
    }

    pub fn confidence(&self, position: usize, label: Label) -> f64 {
        self.probs[position][label.index()]
    }

    /// Sets each span's confidence to the mean probability of its label.
    pub fn annotate(&self, spans: &mut [PerturbationSpan]) {
        for s in spans {
            let label = Label::from(s.granularity);
            let total: f64 = (s.start..s.end).map(|i| self.confidence(i, label)).sum();
            s.confidence = total / s.len() as f64;
        }
    }
}

pub fn predict_from_features(pol: &IndicatorPolicy, features: &[Vec<f64>]) -> VulnerabilityDistribution {
    VulnerabilityDistribution::from_logits(
        features
            .iter()
            .map(|f| {
                let z = pol.net.forward(f).out;
                [z[0], z[1], z[2], z[3]]
            })
            .collect(),
    )
}

pub fn predict_distribution(pol: &IndicatorPolicy, g: &GradientMatrix, emb: &[Vec<f64>]) -> Result<VulnerabilityDistribution> {
    if g.dim() != pol.dim() {
        return Err(Error::ShapeMismatch(format!("gradient width {} vs policy {}", g.dim(), pol.dim())));
    }
    Ok(predict_from_features(pol, &indicator_features(g, emb)?))
}

/// Draws an index from `probs` with one uniform variate.
pub fn sample_categorical<R: Rng + ?Sized>(probs: &[f64], rng: &mut R) -> usize {
    let x: f64 = rng.random();
    let mut acc = 0.0;
    let mut last = 0;
    for (i, &p) in probs.iter().enumerate() {
        if p <= 0.0 {
            continue;
        }
        acc += p;
        last = i;
        if x < acc {
            return i;
        }
    }
    last
}

/// Labels every position and returns `Σ_i log p(c_i)`. Argmax ties go to N.
pub fn label_positions<R: Rng + ?Sized>(
    u: &VulnerabilityDistribution,
    mode: DecisionMode,
    rng: &mut R,
) -> (Vec<Label>, f64) {
    let mut logp = 0.0;
    let labels = u
        .logits
        .iter()
        .zip(&u.probs)
        .map(|(z, p)| {
            let idx = match mode {
                DecisionMode::Sample => sample_categorical(p, rng),
                DecisionMode::Argmax => {
                    let best = z.iter().copied().fold(f64::NEG_INFINITY, f64::max);
                    if z[Label::N.index()] == best {
                        Label::N.index()
                    } else {
                        argmax(z)
                    }
                }
            };
            logp += log_softmax(z)[idx];
            Label::ALL[idx]
        })
        .collect();
    (labels, logp)
}

/// `e_j = Σ_{o ∈ span} [h_o ; u_o] / |p_j|`.
pub fn span_representation(
    h: &[Vec<f64>],
    u: &VulnerabilityDistribution,
    span: &PerturbationSpan,
    plen: usize,
) -> Result<Vec<f64>> {
    if plen == 0 {
        return Err(Error::InvalidParameter("perturbation length must be positive".into()));
    }
    if span.start >= span.end || span.end > h.len() || span.end > u.len() {
        return Err(Error::SpanOutOfBounds {
            start: span.start,
            end: span.end,
            len: h.len().min(u.len()),
        });
    }
    let m = h[span.start].len();
    let mut e = vec![0.0; m + N_LABELS];
    for o in span.start..span.end {
        axpy(1.0, &h[o], &mut e[..m]);
        axpy(1.0, &u.probs[o], &mut e[m..]);
    }
    let inv = 1.0 / plen as f64;
    e.iter_mut().for_each(|v| *v *= inv);
    Ok(e)
}

/// Picks one representation; returns its index and log-probability under the
/// softmax of aggregator logits. Argmax ties go to the lower index.
pub fn select_perturbation<R: Rng + ?Sized>(
    pol: &AggregatorPolicy,
    reps: &[Vec<f64>],
    mode: DecisionMode,
    rng: &mut R,
) -> Result<(usize, f64)> {
    if reps.is_empty() {
        return Err(Error::InvalidParameter("no candidates to select from".into()));
    }
    let logits: Vec<f64> = reps.iter().map(|e| pol.logit(e)).collect();
    let logp = log_softmax(&logits);
    let idx = match mode {
        DecisionMode::Sample => sample_categorical(&softmax(&logits), rng),
        DecisionMode::Argmax => argmax(&logits),
    };
    Ok((idx, logp[idx]))
}
