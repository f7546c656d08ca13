use rand::Rng;
use serde::{Deserialize, Serialize};

use super::oracle::NaturalnessOracle;
use super::reward::{returns_to_go, step_reward, RewardConfig};
use super::state::{ApplyOutcome, AttackState, Pending};
use crate::agents::{
    decode_spans, indicator_features, label_positions, predict_from_features, select_perturbation, DecisionMode,
    DecisionRecord, Label, Policies, SelectionRecord, SpanOption, VulnerabilityDistribution,
};
use crate::attacks::{
    generate_candidates, AttackContext, AttackTables, GeneratorConfig, Granularity, PerturbationCandidate,
    PerturbationSpan,
};
use crate::corpus::{BigramLm, Document, Query, TokenId};
use crate::error::{Error, Result};
use crate::linalg::axpy;
use crate::ranker::{NeuralRanker, QueryScorer};

/// One attack target plus the documents its pairwise loss is taken against.
#[derive(Clone, Debug)]
pub struct EpisodeInput<'a> {
    pub query: &'a Query,
    pub doc: &'a Document,
    pub others: Vec<&'a Document>,
}

/// Read-only pieces shared by every episode.
pub struct Environment<'a> {
    pub surrogate: &'a NeuralRanker,
    pub lm: &'a BigramLm,
    pub tables: &'a AttackTables,
    pub oracle: &'a NaturalnessOracle<'a>,
    pub reward: RewardConfig,
    pub generator: GeneratorConfig,
}

/// Indicator inputs and output for an episode's original document.
#[derive(Clone, Debug)]
pub struct Prepared {
    pub features: Vec<Vec<f64>>,
    pub u: VulnerabilityDistribution,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum Termination {
    /// No spans were decoded.
    NoSpans,
    /// Every candidate was applied.
    Exhausted,
    /// Only no-op candidates remained.
    AllNoOp,
    /// The selected candidate would have exceeded the budget.
    BudgetOverflow,
    /// The applied step fell below the similarity floor and was undone.
    SimilarityFloor,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Step {
    /// Index into the candidate set.
    pub candidate: usize,
    pub granularity: Granularity,
    pub length: usize,
    pub score_before: f64,
    pub score_after: f64,
    pub similarity: f64,
    pub fluency: f64,
    pub reward: f64,
    pub log_prob: f64,
    pub consumed: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Rejection {
    pub candidate: usize,
    pub length: usize,
    pub log_prob: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Trajectory {
    pub query_id: String,
    pub doc_id: String,
    pub labels: Vec<Label>,
    pub label_log_prob: f64,
    pub spans: Vec<PerturbationSpan>,
    pub candidates: Vec<PerturbationCandidate>,
    pub steps: Vec<Step>,
    pub rejected: Option<Rejection>,
    pub termination: Termination,
    pub initial_score: f64,
    pub final_score: f64,
    pub final_tokens: Vec<TokenId>,
    pub final_bounds: Vec<(usize, usize)>,
    /// Decisions for recomputing log-probabilities; a rejected selection is
    /// the last entry of `record.steps`.
    pub record: DecisionRecord,
}

impl Trajectory {
    /// `T`, the number of applied steps.
    pub fn len(&self) -> usize {
        self.steps.len()
    }

    pub fn is_empty(&self) -> bool {
        self.steps.is_empty()
    }

    pub fn rewards(&self) -> Vec<f64> {
        self.steps.iter().map(|s| s.reward).collect()
    }

    pub fn returns(&self, gamma: f64) -> Vec<f64> {
        returns_to_go(&self.rewards(), gamma)
    }

    /// Discounted return from the first step, 0 for an empty trajectory.
    pub fn total_return(&self, gamma: f64) -> f64 {
        self.returns(gamma).first().copied().unwrap_or(0.0)
    }

    pub fn budget_used(&self) -> usize {
        self.steps.last().map(|s| s.consumed).unwrap_or(0)
    }

    pub fn granularity_counts(&self) -> [usize; 3] {
        let mut c = [0; 3];
        for s in &self.steps {
            c[s.granularity as usize] += 1;
        }
        c
    }
}

/// What a selection rule sees at one step.
pub struct Choice<'c> {
    pub step: usize,
    pub pending: &'c [&'c Pending],
    pub reps: &'c [Vec<f64>],
    pub consumed: usize,
}

impl<'a> Environment<'a> {
    pub fn scorer(&self, query: &Query) -> Result<QueryScorer<'a>> {
        QueryScorer::new(self.surrogate, &query.tokens)
    }

    pub fn prepare(&self, pols: &Policies, input: &EpisodeInput) -> Result<Prepared> {
        let g = self.surrogate.doc_token_gradients(input.query, input.doc, &input.others)?;
        let emb: Vec<Vec<f64>> = input
            .doc
            .tokens
            .iter()
            .map(|&t| self.surrogate.embedding(t).to_vec())
            .collect();
        let features = indicator_features(&g, &emb)?;
        let u = predict_from_features(&pols.indicator, &features);
        Ok(Prepared { features, u })
    }

    pub fn candidates(
        &self,
        scorer: &QueryScorer,
        input: &EpisodeInput,
        spans: &[PerturbationSpan],
    ) -> Result<Vec<PerturbationCandidate>> {
        let ctx = AttackContext::new(scorer, input.query, &input.doc.tokens)?;
        generate_candidates(&ctx, spans, self.tables, self.lm, &self.generator)
    }

    fn span_option(&self, state: &AttackState, p: &Pending) -> SpanOption {
        let mut hidden_sum = vec![0.0; self.surrogate.dim()];
        let span = p.candidate.span;
        for &t in &state.tokens[span.start..span.end] {
            axpy(1.0, &self.surrogate.hidden_state(t), &mut hidden_sum);
        }
        SpanOption {
            start: p.original.start,
            end: p.original.end,
            hidden_sum,
            length: p.candidate.length(),
        }
    }

    /// Applies candidates chosen by `choose` until the budget, the candidates
    /// or the similarity floor stop the episode.
    #[allow(clippy::too_many_arguments)]
    pub fn rollout(
        &self,
        scorer: &QueryScorer,
        input: &EpisodeInput,
        prepared: &Prepared,
        labels: Vec<Label>,
        label_log_prob: f64,
        spans: Vec<PerturbationSpan>,
        candidates: Vec<PerturbationCandidate>,
        choose: &mut dyn FnMut(&Choice) -> Result<(usize, f64)>,
    ) -> Result<Trajectory> {
        self.reward.validate()?;
        let d0 = &input.doc.tokens;
        let initial_score = scorer.score(d0);
        let scale = self.reward.score_scale.factor(d0.len());
        let mut state = AttackState::new(
            d0.clone(),
            input.doc.sentence_bounds.clone(),
            candidates.clone(),
            self.reward.budget,
        )?;
        let mut record = DecisionRecord {
            features: prepared.features.clone(),
            labels: labels.clone(),
            steps: Vec::new(),
        };
        let mut steps = Vec::new();
        let mut rejected = None;
        let mut current = initial_score;
        let termination = loop {
            if spans.is_empty() {
                break Termination::NoSpans;
            }
            if state.remaining.is_empty() {
                break Termination::Exhausted;
            }
            let pending: Vec<&Pending> = state.remaining.iter().filter(|p| !p.candidate.no_op).collect();
            if pending.is_empty() {
                break Termination::AllNoOp;
            }
            let options: Vec<SpanOption> = pending.iter().map(|p| self.span_option(&state, p)).collect();
            let reps: Vec<Vec<f64>> = options.iter().map(|o| o.representation(&prepared.u.probs)).collect();
            let (k, log_prob) = choose(&Choice {
                step: state.step,
                pending: &pending,
                reps: &reps,
                consumed: state.consumed,
            })?;
            if k >= pending.len() {
                return Err(Error::InvalidParameter(format!("selection {k} out of {} options", pending.len())));
            }
            let id = pending[k].id;
            let length = pending[k].candidate.length();
            let granularity = pending[k].candidate.span.granularity;
            let index = state.remaining.iter().position(|p| p.id == id).expect("pending comes from remaining");
            record.steps.push(SelectionRecord { options, chosen: k });
            if state.apply(index)? == ApplyOutcome::Rejected {
                rejected = Some(Rejection {
                    candidate: id,
                    length,
                    log_prob,
                });
                break Termination::BudgetOverflow;
            }
            let after = scorer.score(&state.tokens);
            let similarity = self.oracle.similarity(&state.tokens, d0)?;
            if self.reward.sim_floor.is_some_and(|f| similarity < f) {
                state.undo()?;
                rejected = Some(Rejection {
                    candidate: id,
                    length,
                    log_prob,
                });
                break Termination::SimilarityFloor;
            }
            let fluency = self.oracle.fluency(&state.tokens, d0)?;
            let reward = step_reward(&self.reward, scale * current, scale * after, length, similarity, fluency)?;
            steps.push(Step {
                candidate: id,
                granularity,
                length,
                score_before: current,
                score_after: after,
                similarity,
                fluency,
                reward,
                log_prob,
                consumed: state.consumed,
            });
            current = after;
        };
        if termination == Termination::NoSpans {
            log::debug!("no vulnerable spans decoded for {}/{}", input.query.id, input.doc.id);
        }
        Ok(Trajectory {
            query_id: input.query.id.clone(),
            doc_id: input.doc.id.clone(),
            labels,
            label_log_prob,
            spans,
            candidates,
            steps,
            rejected,
            termination,
            initial_score,
            final_score: current,
            final_tokens: state.tokens,
            final_bounds: state.sentence_bounds,
            record,
        })
    }

    /// The full two-agent episode: label, decode, generate, then let the
    /// aggregator pick perturbations.
    pub fn run_episode<R: Rng + ?Sized>(
        &self,
        pols: &Policies,
        input: &EpisodeInput,
        mode: DecisionMode,
        rng: &mut R,
    ) -> Result<Trajectory> {
        let scorer = self.scorer(input.query)?;
        let prepared = self.prepare(pols, input)?;
        let (labels, label_log_prob) = label_positions(&prepared.u, mode, rng);
        self.run_labeled(pols, &scorer, input, &prepared, labels, label_log_prob, mode, rng)
    }

    /// Continues an episode from given labels with aggregator selection.
    #[allow(clippy::too_many_arguments)]
    pub fn run_labeled<R: Rng + ?Sized>(
        &self,
        pols: &Policies,
        scorer: &QueryScorer,
        input: &EpisodeInput,
        prepared: &Prepared,
        labels: Vec<Label>,
        label_log_prob: f64,
        mode: DecisionMode,
        rng: &mut R,
    ) -> Result<Trajectory> {
        let mut spans = decode_spans(&labels, &input.doc.sentence_bounds);
        prepared.u.annotate(&mut spans);
        let candidates = self.candidates(scorer, input, &spans)?;
        self.rollout(
            scorer,
            input,
            prepared,
            labels,
            label_log_prob,
            spans,
            candidates,
            &mut |c: &Choice| select_perturbation(&pols.aggregator, c.reps, mode, rng),
        )
    }
}
