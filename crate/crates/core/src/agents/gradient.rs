//! Log-probability of a recorded decision sequence and its exact gradient.
//!
//! The aggregator sees `u` inside every span representation, so selection
//! terms also backpropagate into the indicator through the softmax.

use serde::{Deserialize, Serialize};

use super::{Label, Policies, N_LABELS};
use crate::error::{Error, Result};
use crate::linalg::{axpy, dot, log_softmax, softmax, MlpTrace};

/// One selectable candidate as the aggregator saw it.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SpanOption {
    /// Span positions in the original document, where `u` lives.
    pub start: usize,
    pub end: usize,
    /// `Σ h_o` over the span in the document the step was taken on.
    pub hidden_sum: Vec<f64>,
    /// `|p_j|`.
    pub length: usize,
}

impl SpanOption {
    /// `e_j = [Σ h_o ; Σ u_o] / |p_j|` with `u` taken at the original span.
    pub fn representation(&self, probs: &[[f64; N_LABELS]]) -> Vec<f64> {
        let m = self.hidden_sum.len();
        let mut e = vec![0.0; m + N_LABELS];
        e[..m].copy_from_slice(&self.hidden_sum);
        for p in &probs[self.start..self.end] {
            axpy(1.0, p, &mut e[m..]);
        }
        let inv = 1.0 / self.length as f64;
        e.iter_mut().for_each(|v| *v *= inv);
        e
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SelectionRecord {
    pub options: Vec<SpanOption>,
    pub chosen: usize,
}

/// Everything needed to recompute an episode's log-probability under
/// different policy parameters.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct DecisionRecord {
    pub features: Vec<Vec<f64>>,
    pub labels: Vec<Label>,
    pub steps: Vec<SelectionRecord>,
}

fn probs4(z: &[f64]) -> [f64; N_LABELS] {
    let p = softmax(z);
    [p[0], p[1], p[2], p[3]]
}

fn check(pols: &Policies, rec: &DecisionRecord) -> Result<()> {
    if rec.features.len() != rec.labels.len() {
        return Err(Error::ShapeMismatch("features and labels differ in length".into()));
    }
    let m = pols.dim();
    for step in &rec.steps {
        if step.chosen >= step.options.len() {
            return Err(Error::InvalidParameter("chosen index outside the option list".into()));
        }
        for o in &step.options {
            if o.end > rec.labels.len() || o.start >= o.end || o.length == 0 || o.hidden_sum.len() != m {
                return Err(Error::InvalidParameter("malformed span option".into()));
            }
        }
    }
    Ok(())
}

/// Label log-probability and per-step selection log-probabilities.
pub fn log_prob_parts(pols: &Policies, rec: &DecisionRecord) -> Result<(f64, Vec<f64>)> {
    check(pols, rec)?;
    let mut label_lp = 0.0;
    let mut probs = Vec::with_capacity(rec.features.len());
    for (f, label) in rec.features.iter().zip(&rec.labels) {
        let z = pols.indicator.net.forward(f).out;
        label_lp += log_softmax(&z)[label.index()];
        probs.push(probs4(&z));
    }
    let steps = rec
        .steps
        .iter()
        .map(|step| {
            let logits: Vec<f64> = step
                .options
                .iter()
                .map(|o| pols.aggregator.logit(&o.representation(&probs)))
                .collect();
            log_softmax(&logits)[step.chosen]
        })
        .collect();
    Ok((label_lp, steps))
}

/// Total log-probability of the recorded labels and selections.
pub fn log_prob(pols: &Policies, rec: &DecisionRecord) -> Result<f64> {
    let (labels, steps) = log_prob_parts(pols, rec)?;
    Ok(labels + steps.iter().sum::<f64>())
}

/// Gradient of `label_weight · log p(labels) + Σ_t step_weights[t] · log p(sel_t)`.
pub fn log_prob_grad(pols: &Policies, rec: &DecisionRecord, label_weight: f64, step_weights: &[f64]) -> Result<Policies> {
    check(pols, rec)?;
    if step_weights.len() != rec.steps.len() {
        return Err(Error::ShapeMismatch(format!(
            "{} step weights for {} steps",
            step_weights.len(),
            rec.steps.len()
        )));
    }
    let mut grad = pols.zeros_like();
    let l = rec.features.len();
    let traces: Vec<MlpTrace> = rec.features.iter().map(|f| pols.indicator.net.forward(f)).collect();
    let probs: Vec<[f64; N_LABELS]> = traces.iter().map(|t| probs4(&t.out)).collect();

    // d objective / d u_o, accumulated over selection steps
    let mut du = vec![[0.0; N_LABELS]; l];
    let m = pols.dim();
    for (step, &w) in rec.steps.iter().zip(step_weights) {
        if w == 0.0 {
            continue;
        }
        let reps: Vec<Vec<f64>> = step.options.iter().map(|o| o.representation(&probs)).collect();
        let traces: Vec<MlpTrace> = reps.iter().map(|e| pols.aggregator.net.forward(e)).collect();
        let logits: Vec<f64> = traces.iter().map(|t| t.out[0]).collect();
        let p = softmax(&logits);
        for (k, opt) in step.options.iter().enumerate() {
            let da = w * ((k == step.chosen) as u8 as f64 - p[k]);
            let de = pols.aggregator.net.backward(&reps[k], &traces[k], &[da], &mut grad.aggregator.net);
            let inv = 1.0 / opt.length as f64;
            for slot in &mut du[opt.start..opt.end] {
                for (c, v) in slot.iter_mut().enumerate() {
                    *v += de[m + c] * inv;
                }
            }
        }
    }

    for i in 0..l {
        let p = &probs[i];
        let mut dz = vec![0.0; N_LABELS];
        let c = rec.labels[i].index();
        for (k, v) in dz.iter_mut().enumerate() {
            *v = label_weight * ((k == c) as u8 as f64 - p[k]);
        }
        // softmax Jacobian-vector product for the path through u
        let pdu = dot(p, &du[i]);
        for k in 0..N_LABELS {
            dz[k] += p[k] * (du[i][k] - pdu);
        }
        if dz.iter().any(|&v| v != 0.0) {
            pols.indicator.net.backward(&rec.features[i], &traces[i], &dz, &mut grad.indicator.net);
        }
    }
    Ok(grad)
}
