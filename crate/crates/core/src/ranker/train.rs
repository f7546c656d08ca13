use std::collections::HashMap;

use super::model::{NeuralRanker, RankerGrad};
use crate::corpus::TokenId;
use crate::linalg::axpy;
use crate::error::{Error, Result};

/// Full-batch pairwise hinge training settings.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct TrainConfig {
    pub epochs: usize,
    pub learning_rate: f64,
    pub margin: f64,
    /// L2 penalty `λ/2 ‖E‖²` on the token embeddings.
    pub weight_decay: f64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            epochs: 200,
            learning_rate: 2.0,
            margin: 1.0,
            weight_decay: 0.0,
        }
    }
}

/// Training pairs over interned token sequences.
#[derive(Clone, Debug, Default)]
pub struct PairSet {
    pub queries: Vec<Vec<TokenId>>,
    pub docs: Vec<Vec<TokenId>>,
    /// `(query, preferred doc, other doc)` indices.
    pub pairs: Vec<(usize, usize, usize)>,
}

struct Evaluation {
    loss: f64,
    /// `∂loss/∂f(q,d)` per scored key
    coeffs: Vec<f64>,
}

struct Batch<'a> {
    set: &'a PairSet,
    keys: Vec<(usize, usize)>,
    pair_keys: Vec<(usize, usize)>,
}

impl<'a> Batch<'a> {
    fn new(set: &'a PairSet) -> Self {
        let mut index = HashMap::new();
        let mut keys = Vec::new();
        let mut key_of = |q: usize, d: usize| {
            *index.entry((q, d)).or_insert_with(|| {
                keys.push((q, d));
                keys.len() - 1
            })
        };
        let pair_keys = set
            .pairs
            .iter()
            .map(|&(q, hi, lo)| (key_of(q, hi), key_of(q, lo)))
            .collect();
        Batch {
            set,
            keys,
            pair_keys,
        }
    }

    fn means(&self, model: &NeuralRanker) -> Result<(Vec<Vec<f64>>, Vec<Vec<f64>>)> {
        let q = self
            .set
            .queries
            .iter()
            .map(|t| model.mean_embedding(t))
            .collect::<Result<_>>()?;
        let d = self
            .set
            .docs
            .iter()
            .map(|t| model.mean_embedding(t))
            .collect::<Result<_>>()?;
        Ok((q, d))
    }

    fn evaluate(&self, model: &NeuralRanker, margin: f64, decay: f64) -> Result<(Evaluation, Vec<Vec<f64>>, Vec<Vec<f64>>)> {
        let (qm, dm) = self.means(model)?;
        let scores: Vec<f64> = self
            .keys
            .iter()
            .map(|&(q, d)| model.score_means(&qm[q], &dm[d]).0)
            .collect();
        let n = self.pair_keys.len() as f64;
        let mut loss = 0.0;
        let mut coeffs = vec![0.0; self.keys.len()];
        for &(hi, lo) in &self.pair_keys {
            let h = margin - scores[hi] + scores[lo];
            if h > 0.0 {
                loss += h / n;
                coeffs[hi] -= 1.0 / n;
                coeffs[lo] += 1.0 / n;
            }
        }
        if decay > 0.0 {
            loss += 0.5 * decay * model.embeddings.iter().map(|v| v * v).sum::<f64>();
        }
        Ok((Evaluation { loss, coeffs }, qm, dm))
    }

    fn gradient(&self, model: &NeuralRanker, eval: &Evaluation, qm: &[Vec<f64>], dm: &[Vec<f64>], decay: f64) -> RankerGrad {
        let mut grad = model.zero_grad();
        if decay > 0.0 {
            axpy(decay, &model.embeddings, &mut grad.embeddings);
        }
        for (&(q, d), &c) in self.keys.iter().zip(&eval.coeffs) {
            if c != 0.0 {
                model.accumulate_score_grad(
                    &self.set.queries[q],
                    &self.set.docs[d],
                    &qm[q],
                    &dm[d],
                    c,
                    &mut grad,
                );
            }
        }
        grad
    }
}

/// Mean hinge loss of `model` on `set`.
pub fn pairwise_set_loss(model: &NeuralRanker, set: &PairSet, margin: f64) -> Result<f64> {
    Ok(Batch::new(set).evaluate(model, margin, 0.0)?.0.loss)
}

/// Full-batch gradient descent on the mean pairwise hinge loss plus the
/// optional embedding penalty.
///
/// Each epoch backtracks (halving the step) until the loss does not increase,
/// so the returned history is non-increasing. `history[0]` is the loss
/// before training.
pub fn train_pairwise(model: &mut NeuralRanker, set: &PairSet, cfg: &TrainConfig) -> Result<Vec<f64>> {
    if set.pairs.is_empty() {
        return Err(Error::InvalidParameter("no training pairs".into()));
    }
    let batch = Batch::new(set);
    let (mut eval, mut qm, mut dm) = batch.evaluate(model, cfg.margin, cfg.weight_decay)?;
    let mut history = vec![eval.loss];
    let mut step = cfg.learning_rate;
    for _ in 0..cfg.epochs {
        let grad = batch.gradient(model, &eval, &qm, &dm, cfg.weight_decay);
        let mut accepted = false;
        for _ in 0..40 {
            let mut trial = model.clone();
            trial.apply_grad(&grad, step);
            let (e, q, d) = batch.evaluate(&trial, cfg.margin, cfg.weight_decay)?;
            if e.loss <= eval.loss && trial.is_finite() {
                *model = trial;
                eval = e;
                qm = q;
                dm = d;
                accepted = true;
                step *= 1.1;
                break;
            }
            step *= 0.5;
        }
        history.push(eval.loss);
        if !accepted || eval.loss == 0.0 {
            // flat region or converged; remaining epochs would not move
            let last = eval.loss;
            history.resize(cfg.epochs + 1, last);
            break;
        }
    }
    Ok(history)
}
