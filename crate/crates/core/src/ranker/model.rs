//! Mean-embedding interaction ranker with analytic gradients.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::GradientMatrix;
use crate::corpus::{Document, Query, TokenId};
use crate::error::{Error, Result};
use crate::linalg::{axpy, matvec, normal_vec, Activation, Mlp, MlpTrace};

pub const DEFAULT_DIM: usize = 32;
pub const DEFAULT_HIDDEN: usize = 32;

/// Small initial embeddings let shared, trained directions dominate the
/// random component, which is what lets unseen query terms generalize.
pub const EMBEDDING_INIT_STD: f64 = 0.1;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct RankerConfig {
    /// Embedding / hidden-state width `m`.
    pub dim: usize,
    /// Width of the scoring perceptron's hidden layer.
    pub hidden: usize,
}

impl Default for RankerConfig {
    fn default() -> Self {
        RankerConfig {
            dim: DEFAULT_DIM,
            hidden: DEFAULT_HIDDEN,
        }
    }
}

/// `f(q, d) = w2 · relu(W1 [ē_q ; ē_d ; ē_q ⊙ ē_d] + b1) + b2`, where `ē` is the
/// mean token embedding. A separate `tanh` encoder produces per-token hidden
/// states; it does not feed the score.
#[derive(Clone, Debug, PartialEq)]
pub struct NeuralRanker {
    pub(crate) vocab_size: usize,
    pub(crate) dim: usize,
    pub(crate) embeddings: Vec<f64>,
    pub(crate) enc_w: Vec<f64>,
    pub(crate) enc_b: Vec<f64>,
    pub(crate) scorer: Mlp,
}

/// The attacker-side ranker. Same architecture as the target's hidden model.
pub type SurrogateRanker = NeuralRanker;

/// Parameter gradient container for training the scorer and embeddings.
#[derive(Clone, Debug)]
pub(crate) struct RankerGrad {
    pub embeddings: Vec<f64>,
    pub scorer: Mlp,
}

impl NeuralRanker {
    pub fn zeros(vocab_size: usize, cfg: RankerConfig) -> Self {
        let m = cfg.dim;
        NeuralRanker {
            vocab_size,
            dim: m,
            embeddings: vec![0.0; vocab_size * m],
            enc_w: vec![0.0; m * m],
            enc_b: vec![0.0; m],
            scorer: Mlp::zeros(3 * m, cfg.hidden, 1, Activation::Relu),
        }
    }

    pub fn random(vocab_size: usize, cfg: RankerConfig, seed: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let m = cfg.dim;
        let mut r = Self::zeros(vocab_size, cfg);
        r.embeddings = normal_vec(&mut rng, vocab_size * m, EMBEDDING_INIT_STD);
        r.enc_w = normal_vec(&mut rng, m * m, 1.0 / (m as f64).sqrt());
        r.scorer = Mlp::random(3 * m, cfg.hidden, 1, Activation::Relu, &mut rng);
        r
    }

    pub fn config(&self) -> RankerConfig {
        RankerConfig {
            dim: self.dim,
            hidden: self.scorer.hidden,
        }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn vocab_size(&self) -> usize {
        self.vocab_size
    }

    pub fn embedding(&self, token: TokenId) -> &[f64] {
        let t = (token as usize).min(self.vocab_size - 1);
        &self.embeddings[t * self.dim..(t + 1) * self.dim]
    }

    /// Per-position embeddings as an `l x m` row-major block.
    pub fn embed(&self, tokens: &[TokenId]) -> Vec<f64> {
        let mut out = Vec::with_capacity(tokens.len() * self.dim);
        for &t in tokens {
            out.extend_from_slice(self.embedding(t));
        }
        out
    }

    pub fn mean_embedding(&self, tokens: &[TokenId]) -> Result<Vec<f64>> {
        if tokens.is_empty() {
            return Err(Error::EmptySequence);
        }
        let mut mean = vec![0.0; self.dim];
        for &t in tokens {
            axpy(1.0, self.embedding(t), &mut mean);
        }
        let inv = 1.0 / tokens.len() as f64;
        mean.iter_mut().for_each(|v| *v *= inv);
        Ok(mean)
    }

    fn features(&self, eq: &[f64], ed: &[f64]) -> Vec<f64> {
        let mut z = Vec::with_capacity(3 * self.dim);
        z.extend_from_slice(eq);
        z.extend_from_slice(ed);
        z.extend(eq.iter().zip(ed).map(|(a, b)| a * b));
        z
    }

    pub(crate) fn score_means(&self, eq: &[f64], ed: &[f64]) -> (f64, Vec<f64>, MlpTrace) {
        let z = self.features(eq, ed);
        let trace = self.scorer.forward(&z);
        (trace.out[0], z, trace)
    }

    pub fn score(&self, q: &Query, d: &Document) -> Result<f64> {
        self.score_tokens(&q.tokens, &d.tokens)
    }

    pub fn score_tokens(&self, q: &[TokenId], d: &[TokenId]) -> Result<f64> {
        let eq = self.mean_embedding(q)?;
        let ed = self.mean_embedding(d)?;
        Ok(self.score_means(&eq, &ed).0)
    }

    /// Score from explicit per-position vectors (`l x m` blocks).
    pub fn score_embedded(&self, q_vecs: &[f64], d_vecs: &[f64]) -> Result<f64> {
        let eq = self.mean_of_block(q_vecs)?;
        let ed = self.mean_of_block(d_vecs)?;
        Ok(self.score_means(&eq, &ed).0)
    }

    fn mean_of_block(&self, block: &[f64]) -> Result<Vec<f64>> {
        if block.is_empty() || block.len() % self.dim != 0 {
            return Err(Error::ShapeMismatch(format!(
                "block of {} values is not a non-empty multiple of {}",
                block.len(),
                self.dim
            )));
        }
        let l = block.len() / self.dim;
        let mut mean = vec![0.0; self.dim];
        for row in block.chunks(self.dim) {
            axpy(1.0 / l as f64, row, &mut mean);
        }
        Ok(mean)
    }

    /// Score plus gradients with respect to the query and document means.
    pub(crate) fn score_and_mean_grads(&self, eq: &[f64], ed: &[f64]) -> (f64, Vec<f64>, Vec<f64>) {
        let (s, z, trace) = self.score_means(eq, ed);
        let mut scratch = self.scorer.zeros_like();
        let dz = self.scorer.backward(&z, &trace, &[1.0], &mut scratch);
        let m = self.dim;
        let mut deq = dz[..m].to_vec();
        let mut ded = dz[m..2 * m].to_vec();
        for k in 0..m {
            deq[k] += dz[2 * m + k] * ed[k];
            ded[k] += dz[2 * m + k] * eq[k];
        }
        (s, deq, ded)
    }

    /// `∂f/∂x_i` for every document position `i`, as an `m x l` matrix.
    pub fn score_position_gradients(&self, q: &Query, d: &Document) -> Result<GradientMatrix> {
        let eq = self.mean_embedding(&q.tokens)?;
        let ed = self.mean_embedding(&d.tokens)?;
        let (_, _, ded) = self.score_and_mean_grads(&eq, &ed);
        let l = d.tokens.len();
        let row: Vec<f64> = ded.iter().map(|g| g / l as f64).collect();
        Ok(GradientMatrix::repeat(&row, l))
    }

    /// `h_i = tanh(W_h x_i + b_h)` for every position.
    pub fn hidden_states(&self, d: &Document) -> Result<Vec<Vec<f64>>> {
        self.hidden_states_tokens(&d.tokens)
    }

    pub fn hidden_states_tokens(&self, tokens: &[TokenId]) -> Result<Vec<Vec<f64>>> {
        if tokens.is_empty() {
            return Err(Error::EmptySequence);
        }
        Ok(tokens.iter().map(|&t| self.hidden_state(t)).collect())
    }

    pub fn hidden_state(&self, token: TokenId) -> Vec<f64> {
        let mut h = matvec(&self.enc_w, self.dim, self.dim, self.embedding(token));
        for (v, b) in h.iter_mut().zip(&self.enc_b) {
            *v = (*v + b).tanh();
        }
        h
    }

    /// `Σ_{d'} max(0, 1 - f(q,d) + f(q,d'))`
    pub fn pairwise_loss(&self, q: &Query, d: &Document, others: &[&Document]) -> Result<f64> {
        if others.is_empty() {
            return Err(Error::InvalidParameter("pairwise loss needs at least one other document".into()));
        }
        let s = self.score(q, d)?;
        let mut loss = 0.0;
        for o in others {
            loss += (1.0 - s + self.score(q, o)?).max(0.0);
        }
        Ok(loss)
    }

    /// Gradient of the pairwise loss with respect to each document position's
    /// embedding, averaged over the pairs.
    pub fn doc_token_gradients(&self, q: &Query, d: &Document, others: &[&Document]) -> Result<GradientMatrix> {
        if others.is_empty() {
            return Err(Error::InvalidParameter("pairwise loss needs at least one other document".into()));
        }
        let eq = self.mean_embedding(&q.tokens)?;
        let ed = self.mean_embedding(&d.tokens)?;
        let (s, _, ded) = self.score_and_mean_grads(&eq, &ed);
        let mut active = 0usize;
        for o in others {
            let so = self.score_means(&eq, &self.mean_embedding(&o.tokens)?).0;
            if 1.0 - s + so > 0.0 {
                active += 1;
            }
        }
        let l = d.tokens.len();
        let coeff = -(active as f64) / (others.len() as f64 * l as f64);
        let row: Vec<f64> = ded.iter().map(|g| g * coeff).collect();
        Ok(GradientMatrix::repeat(&row, l))
    }

    pub(crate) fn zero_grad(&self) -> RankerGrad {
        RankerGrad {
            embeddings: vec![0.0; self.embeddings.len()],
            scorer: self.scorer.zeros_like(),
        }
    }

    /// Adds `coeff * ∂f(q,d)/∂θ` to `grad`. Means must match the tokens.
    pub(crate) fn accumulate_score_grad(
        &self,
        q: &[TokenId],
        d: &[TokenId],
        eq: &[f64],
        ed: &[f64],
        coeff: f64,
        grad: &mut RankerGrad,
    ) {
        let (_, z, trace) = self.score_means(eq, ed);
        let mut g = self.scorer.zeros_like();
        let dz = self.scorer.backward(&z, &trace, &[1.0], &mut g);
        grad.scorer.add_scaled(&g, coeff);
        let m = self.dim;
        let mut deq = dz[..m].to_vec();
        let mut ded = dz[m..2 * m].to_vec();
        for k in 0..m {
            deq[k] += dz[2 * m + k] * ed[k];
            ded[k] += dz[2 * m + k] * eq[k];
        }
        for (tokens, dmean) in [(q, &deq), (d, &ded)] {
            let w = coeff / tokens.len() as f64;
            for &t in tokens {
                let t = t as usize;
                axpy(w, dmean, &mut grad.embeddings[t * m..(t + 1) * m]);
            }
        }
    }

    pub(crate) fn apply_grad(&mut self, grad: &RankerGrad, step: f64) {
        axpy(-step, &grad.embeddings, &mut self.embeddings);
        self.scorer.add_scaled(&grad.scorer, -step);
    }

    pub fn is_finite(&self) -> bool {
        self.embeddings.iter().all(|v| v.is_finite())
            && self.enc_w.iter().all(|v| v.is_finite())
            && self.enc_b.iter().all(|v| v.is_finite())
            && self.scorer.is_finite()
    }
}

/// Query-specialised fast scorer.
///
/// For a fixed query the first layer is affine in `ē_d`, so every token's
/// contribution can be projected once; scoring an edited document is then a
/// sum over token projections.
#[derive(Clone, Debug)]
pub struct QueryScorer<'a> {
    ranker: &'a NeuralRanker,
    base: Vec<f64>,
    proj: Vec<f64>,
}

impl<'a> QueryScorer<'a> {
    pub fn new(ranker: &'a NeuralRanker, query: &[TokenId]) -> Result<Self> {
        let eq = ranker.mean_embedding(query)?;
        let m = ranker.dim;
        let h = ranker.scorer.hidden;
        let w1 = &ranker.scorer.w1;
        let mut base = ranker.scorer.b1.clone();
        let mut mat = vec![0.0; h * m];
        for j in 0..h {
            let row = &w1[j * 3 * m..(j + 1) * 3 * m];
            for k in 0..m {
                base[j] += row[k] * eq[k];
                mat[j * m + k] = row[m + k] + row[2 * m + k] * eq[k];
            }
        }
        let mut proj = Vec::with_capacity(ranker.vocab_size * h);
        for t in 0..ranker.vocab_size {
            let e = &ranker.embeddings[t * m..(t + 1) * m];
            proj.extend(matvec(&mat, h, m, e));
        }
        Ok(QueryScorer { ranker, base, proj })
    }

    pub fn ranker(&self) -> &NeuralRanker {
        self.ranker
    }

    pub fn width(&self) -> usize {
        self.base.len()
    }

    pub fn projection(&self, token: TokenId) -> &[f64] {
        let h = self.base.len();
        let t = (token as usize).min(self.ranker.vocab_size - 1);
        &self.proj[t * h..(t + 1) * h]
    }

    /// Sum of token projections; pair with [`QueryScorer::score_sum`].
    pub fn sum(&self, tokens: &[TokenId]) -> Vec<f64> {
        let mut acc = vec![0.0; self.base.len()];
        for &t in tokens {
            axpy(1.0, self.projection(t), &mut acc);
        }
        acc
    }

    pub fn score_sum(&self, sum: &[f64], len: usize) -> f64 {
        let inv = 1.0 / len as f64;
        let mlp = &self.ranker.scorer;
        let mut s = mlp.b2[0];
        for j in 0..self.base.len() {
            let pre = self.base[j] + sum[j] * inv;
            if pre > 0.0 {
                s += mlp.w2[j] * pre;
            }
        }
        s
    }

    pub fn score(&self, tokens: &[TokenId]) -> f64 {
        self.score_sum(&self.sum(tokens), tokens.len())
    }

    /// Score of `tokens` with `tokens[start..end]` replaced by `replacement`.
    pub fn score_replaced(&self, tokens: &[TokenId], start: usize, end: usize, replacement: &[TokenId]) -> f64 {
        let mut sum = self.sum(tokens);
        for &t in &tokens[start..end] {
            axpy(-1.0, self.projection(t), &mut sum);
        }
        for &t in replacement {
            axpy(1.0, self.projection(t), &mut sum);
        }
        self.score_sum(&sum, tokens.len() - (end - start) + replacement.len())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::Vocabulary;

    fn doc(tokens: Vec<TokenId>) -> Document {
        let l = tokens.len();
        Document::from_tokens("d", tokens, vec![(0, l)], &Vocabulary::new())
    }

    fn query(tokens: Vec<TokenId>) -> Query {
        Query {
            id: "q".into(),
            text: String::new(),
            tokens,
        }
    }

    #[test]
    fn zero_network_scores_zero() {
        let r = NeuralRanker::zeros(10, RankerConfig::default());
        assert_eq!(r.score(&query(vec![1, 2]), &doc(vec![3, 4, 5])).unwrap(), 0.0);
    }

    #[test]
    fn score_is_bitwise_deterministic() {
        let r = NeuralRanker::random(20, RankerConfig::default(), 1);
        let q = query(vec![1, 2]);
        let d = doc(vec![3, 4, 5, 9]);
        assert_eq!(r.score(&q, &d).unwrap().to_bits(), r.score(&q, &d).unwrap().to_bits());
    }

    #[test]
    fn empty_sequences_are_rejected() {
        let r = NeuralRanker::random(20, RankerConfig::default(), 1);
        assert!(r.score_tokens(&[], &[1]).is_err());
        assert!(r.hidden_states_tokens(&[]).is_err());
    }

    #[test]
    fn hidden_state_shapes_and_zero_encoder() {
        let mut r = NeuralRanker::random(20, RankerConfig::default(), 1);
        let d = doc(vec![1, 2, 3, 4, 5, 6, 7]);
        let h = r.hidden_states(&d).unwrap();
        assert_eq!(h.len(), 7);
        assert!(h.iter().all(|v| v.len() == r.dim()));
        let same = r.hidden_states(&doc(vec![4, 9, 4])).unwrap();
        assert_eq!(same[0], same[2]);
        r.enc_w.iter_mut().for_each(|v| *v = 0.0);
        r.enc_b.iter_mut().for_each(|v| *v = 0.0);
        assert!(r.hidden_states(&d).unwrap().iter().flatten().all(|&v| v == 0.0));
    }

    #[test]
    fn query_scorer_agrees_with_direct_score() {
        let r = NeuralRanker::random(30, RankerConfig::default(), 5);
        let q = query(vec![1, 2, 3]);
        let d = doc(vec![4, 5, 6, 7, 8, 1]);
        let fast = QueryScorer::new(&r, &q.tokens).unwrap();
        assert!((fast.score(&d.tokens) - r.score(&q, &d).unwrap()).abs() < 1e-12);
        let edited = doc(vec![4, 9, 9, 9, 7, 8, 1]);
        let s = fast.score_replaced(&d.tokens, 1, 3, &[9, 9, 9]);
        assert!((s - r.score(&q, &edited).unwrap()).abs() < 1e-12);
    }

    #[test]
    fn saturated_hinge_gives_zero_gradient() {
        let mut r = NeuralRanker::zeros(10, RankerConfig::default());
        let m = r.dim();
        // score = relu(10 * ē_d[0]); tokens 2 and 3 carry ē[0] = 1, token 4 carries 0
        r.scorer.w2[0] = 1.0;
        r.scorer.w1[m] = 10.0;
        r.embeddings[2 * m] = 1.0;
        r.embeddings[3 * m] = 1.0;
        let q = query(vec![1]);
        let d = doc(vec![2, 3]);
        let o = doc(vec![4]);
        assert_eq!(r.score(&q, &d).unwrap(), 10.0);
        assert_eq!(r.pairwise_loss(&q, &d, &[&o]).unwrap(), 0.0);
        let g = r.doc_token_gradients(&q, &d, &[&o]).unwrap();
        assert!(g.data().iter().all(|&v| v == 0.0));
    }

    #[test]
    fn equal_scores_give_unit_loss() {
        let r = NeuralRanker::random(10, RankerConfig::default(), 2);
        let q = query(vec![1]);
        let d = doc(vec![2, 3]);
        let twin = doc(vec![3, 2]);
        assert!((r.pairwise_loss(&q, &d, &[&twin]).unwrap() - 1.0).abs() < 1e-12);
    }
}
