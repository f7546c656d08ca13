//! Small dense helpers and a two-layer perceptron with hand-written backprop.
//!
//! Everything is row-major `Vec<f64>`; the models in this crate are small
//! enough that a BLAS dependency buys nothing.

use rand::Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    debug_assert_eq!(a.len(), b.len());
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// `y += alpha * x`
pub fn axpy(alpha: f64, x: &[f64], y: &mut [f64]) {
    debug_assert_eq!(x.len(), y.len());
    for (yi, xi) in y.iter_mut().zip(x) {
        *yi += alpha * xi;
    }
}

pub fn norm(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}

/// Cosine similarity; zero vectors are treated as orthogonal to everything.
pub fn cosine(a: &[f64], b: &[f64]) -> f64 {
    let (na, nb) = (norm(a), norm(b));
    if na == 0.0 || nb == 0.0 {
        return 0.0;
    }
    (dot(a, b) / (na * nb)).clamp(-1.0, 1.0)
}

pub fn softmax(logits: &[f64]) -> Vec<f64> {
    let max = logits.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let exps: Vec<f64> = logits.iter().map(|z| (z - max).exp()).collect();
    let sum: f64 = exps.iter().sum();
    exps.into_iter().map(|e| e / sum).collect()
}

pub fn log_softmax(logits: &[f64]) -> Vec<f64> {
    let max = logits.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let lse = max + logits.iter().map(|z| (z - max).exp()).sum::<f64>().ln();
    logits.iter().map(|z| z - lse).collect()
}

/// Index of the largest value; the lowest index wins ties.
pub fn argmax(values: &[f64]) -> usize {
    let mut best = 0;
    for (i, v) in values.iter().enumerate() {
        if *v > values[best] {
            best = i;
        }
    }
    best
}

/// Row-major matrix-vector product `w (rows x cols) * x`.
pub fn matvec(w: &[f64], rows: usize, cols: usize, x: &[f64]) -> Vec<f64> {
    debug_assert_eq!(w.len(), rows * cols);
    debug_assert_eq!(x.len(), cols);
    (0..rows)
        .map(|r| dot(&w[r * cols..(r + 1) * cols], x))
        .collect()
}

pub(crate) fn normal_vec<R: Rng + ?Sized>(rng: &mut R, len: usize, std: f64) -> Vec<f64> {
    let dist = Normal::new(0.0, std).expect("finite std");
    (0..len).map(|_| dist.sample(rng)).collect()
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum Activation {
    Tanh,
    Relu,
}

impl Activation {
    fn apply(self, z: f64) -> f64 {
        match self {
            Activation::Tanh => z.tanh(),
            Activation::Relu => z.max(0.0),
        }
    }

    /// Derivative expressed through the pre-activation and activation.
    fn derivative(self, pre: f64, act: f64) -> f64 {
        match self {
            Activation::Tanh => 1.0 - act * act,
            Activation::Relu => {
                if pre > 0.0 {
                    1.0
                } else {
                    0.0
                }
            }
        }
    }
}

/// `out = W2 · act(W1 · x + b1) + b2`
///
/// The same struct doubles as its own gradient accumulator (see
/// [`Mlp::zeros_like`]).
#[derive(Clone, Debug, PartialEq)]
pub struct Mlp {
    pub input: usize,
    pub hidden: usize,
    pub output: usize,
    pub act: Activation,
    pub w1: Vec<f64>,
    pub b1: Vec<f64>,
    pub w2: Vec<f64>,
    pub b2: Vec<f64>,
}

/// Intermediate values from a forward pass, needed by `backward`.
#[derive(Clone, Debug)]
pub struct MlpTrace {
    pub pre: Vec<f64>,
    pub hidden: Vec<f64>,
    pub out: Vec<f64>,
}

impl Mlp {
    pub fn zeros(input: usize, hidden: usize, output: usize, act: Activation) -> Self {
        Mlp {
            input,
            hidden,
            output,
            act,
            w1: vec![0.0; hidden * input],
            b1: vec![0.0; hidden],
            w2: vec![0.0; output * hidden],
            b2: vec![0.0; output],
        }
    }

    /// Gaussian init with std `1/sqrt(fan_in)`, zero biases.
    pub fn random<R: Rng + ?Sized>(
        input: usize,
        hidden: usize,
        output: usize,
        act: Activation,
        rng: &mut R,
    ) -> Self {
        let mut mlp = Mlp::zeros(input, hidden, output, act);
        mlp.w1 = normal_vec(rng, hidden * input, 1.0 / (input as f64).sqrt());
        mlp.w2 = normal_vec(rng, output * hidden, 1.0 / (hidden as f64).sqrt());
        mlp
    }

    pub fn zeros_like(&self) -> Self {
        Mlp::zeros(self.input, self.hidden, self.output, self.act)
    }

    pub fn forward(&self, x: &[f64]) -> MlpTrace {
        assert_eq!(x.len(), self.input, "mlp input width");
        let mut pre = matvec(&self.w1, self.hidden, self.input, x);
        for (p, b) in pre.iter_mut().zip(&self.b1) {
            *p += b;
        }
        let hidden: Vec<f64> = pre.iter().map(|&z| self.act.apply(z)).collect();
        let mut out = matvec(&self.w2, self.output, self.hidden, &hidden);
        for (o, b) in out.iter_mut().zip(&self.b2) {
            *o += b;
        }
        MlpTrace { pre, hidden, out }
    }

    /// Accumulates parameter gradients into `grad` and returns `d out / d x`
    /// contracted with `dout`.
    pub fn backward(&self, x: &[f64], trace: &MlpTrace, dout: &[f64], grad: &mut Mlp) -> Vec<f64> {
        debug_assert_eq!(dout.len(), self.output);
        let mut dhidden = vec![0.0; self.hidden];
        for (o, &d) in dout.iter().enumerate() {
            if d == 0.0 {
                continue;
            }
            grad.b2[o] += d;
            let row = o * self.hidden;
            axpy(d, &trace.hidden, &mut grad.w2[row..row + self.hidden]);
            axpy(d, &self.w2[row..row + self.hidden], &mut dhidden);
        }
        let mut dx = vec![0.0; self.input];
        for j in 0..self.hidden {
            let dpre = dhidden[j] * self.act.derivative(trace.pre[j], trace.hidden[j]);
            if dpre == 0.0 {
                continue;
            }
            grad.b1[j] += dpre;
            let row = j * self.input;
            axpy(dpre, x, &mut grad.w1[row..row + self.input]);
            axpy(dpre, &self.w1[row..row + self.input], &mut dx);
        }
        dx
    }

    pub fn num_params(&self) -> usize {
        self.w1.len() + self.b1.len() + self.w2.len() + self.b2.len()
    }

    pub fn to_flat(&self) -> Vec<f64> {
        let mut v = Vec::with_capacity(self.num_params());
        v.extend_from_slice(&self.w1);
        v.extend_from_slice(&self.b1);
        v.extend_from_slice(&self.w2);
        v.extend_from_slice(&self.b2);
        v
    }

    pub fn set_flat(&mut self, flat: &[f64]) {
        assert_eq!(flat.len(), self.num_params());
        let mut rest = flat;
        for part in [&mut self.w1, &mut self.b1, &mut self.w2, &mut self.b2] {
            let (head, tail) = rest.split_at(part.len());
            part.copy_from_slice(head);
            rest = tail;
        }
    }

    pub fn params_mut(&mut self) -> [&mut Vec<f64>; 4] {
        [&mut self.w1, &mut self.b1, &mut self.w2, &mut self.b2]
    }

    /// `self += scale * other`
    pub fn add_scaled(&mut self, other: &Mlp, scale: f64) {
        axpy(scale, &other.w1, &mut self.w1);
        axpy(scale, &other.b1, &mut self.b1);
        axpy(scale, &other.w2, &mut self.w2);
        axpy(scale, &other.b2, &mut self.b2);
    }

    pub fn sq_norm(&self) -> f64 {
        [&self.w1, &self.b1, &self.w2, &self.b2]
            .iter()
            .map(|p| dot(p, p))
            .sum()
    }

    pub fn is_finite(&self) -> bool {
        [&self.w1, &self.b1, &self.w2, &self.b2]
            .iter()
            .all(|p| p.iter().all(|v| v.is_finite()))
    }
}
