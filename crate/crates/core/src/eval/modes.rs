use std::fmt;
use std::str::FromStr;

use rand::Rng;
use serde::{Deserialize, Serialize};

use super::metrics::AttackOutcome;
use super::targets::AttackTarget;
use crate::agents::{decode_spans, label_positions, select_perturbation, DecisionMode, Label, Policies};
use crate::attacks::Granularity;
use crate::corpus::{Corpus, Document, Query};
use crate::env::{Choice, EpisodeInput, Environment, Prepared, Trajectory};
use crate::error::{Error, Result};
use crate::ranker::{RankedList, TargetRanker};

/// How the frozen policies (or a baseline) drive an evaluation episode.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum AttackMode {
    /// Argmax labels and argmax aggregator selection.
    Full,
    /// Only one granularity may be labelled; the others get zero confidence.
    Single(Granularity),
    /// Argmax labels, candidates applied by decreasing span confidence.
    Greedy,
    /// Argmax labels, candidates applied cycling word, phrase, sentence.
    Triple,
    /// Uniform labels and uniform candidate choice.
    Random,
}

impl AttackMode {
    pub const ALL: [AttackMode; 7] = [
        AttackMode::Full,
        AttackMode::Single(Granularity::Word),
        AttackMode::Single(Granularity::Phrase),
        AttackMode::Single(Granularity::Sentence),
        AttackMode::Greedy,
        AttackMode::Triple,
        AttackMode::Random,
    ];
}

impl fmt::Display for AttackMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            AttackMode::Full => f.write_str("full"),
            AttackMode::Single(g) => write!(f, "single-granular={g}"),
            AttackMode::Greedy => f.write_str("greedy"),
            AttackMode::Triple => f.write_str("triple"),
            AttackMode::Random => f.write_str("random"),
        }
    }
}

impl FromStr for AttackMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let bad = || Error::BadValue {
            key: "mode".into(),
            value: s.into(),
        };
        match s {
            "full" => Ok(AttackMode::Full),
            "greedy" => Ok(AttackMode::Greedy),
            "triple" => Ok(AttackMode::Triple),
            "random" => Ok(AttackMode::Random),
            _ => {
                let g = s.strip_prefix("single-granular=").ok_or_else(bad)?;
                let mut chars = g.chars();
                match (chars.next(), chars.next()) {
                    (Some(c), None) => Granularity::from_symbol(c).map(AttackMode::Single).ok_or_else(bad),
                    _ => Err(bad()),
                }
            }
        }
    }
}

/// Keeps only `keep` and N in every position's distribution.
pub fn restrict_to(prepared: &Prepared, keep: Granularity) -> Prepared {
    let keep = Label::from(keep).index();
    let logits = prepared
        .u
        .logits
        .iter()
        .map(|z| {
            let mut z = *z;
            for (i, v) in z.iter_mut().enumerate() {
                if i != keep && i != Label::N.index() {
                    *v = f64::NEG_INFINITY;
                }
            }
            z
        })
        .collect();
    Prepared {
        features: prepared.features.clone(),
        u: crate::agents::VulnerabilityDistribution::from_logits(logits),
    }
}

fn by_confidence(c: &Choice, filter: impl Fn(Granularity) -> bool) -> Option<usize> {
    let mut best: Option<usize> = None;
    for (i, p) in c.pending.iter().enumerate() {
        if !filter(p.candidate.span.granularity) {
            continue;
        }
        if best.is_none_or(|b| p.candidate.span.confidence > c.pending[b].candidate.span.confidence) {
            best = Some(i);
        }
    }
    best
}

/// Runs one evaluation episode in `mode`.
pub fn run_mode<R: Rng + ?Sized>(
    env: &Environment,
    pols: &Policies,
    input: &EpisodeInput,
    mode: AttackMode,
    rng: &mut R,
) -> Result<Trajectory> {
    let scorer = env.scorer(input.query)?;
    let mut prepared = env.prepare(pols, input)?;
    if let AttackMode::Single(g) = mode {
        prepared = restrict_to(&prepared, g);
    }
    let (labels, label_lp) = match mode {
        AttackMode::Random => {
            let labels: Vec<Label> = (0..input.doc.len()).map(|_| Label::ALL[rng.random_range(0..4)]).collect();
            (labels, 0.0)
        }
        _ => label_positions(&prepared.u, DecisionMode::Argmax, rng),
    };
    let mut spans = decode_spans(&labels, &input.doc.sentence_bounds);
    prepared.u.annotate(&mut spans);
    let candidates = env.candidates(&scorer, input, &spans)?;
    let mut choose = |c: &Choice| -> Result<(usize, f64)> {
        match mode {
            AttackMode::Full | AttackMode::Single(_) => {
                select_perturbation(&pols.aggregator, c.reps, DecisionMode::Argmax, rng)
            }
            AttackMode::Greedy => Ok((by_confidence(c, |_| true).expect("pending is non-empty"), 0.0)),
            AttackMode::Triple => {
                let k = (0..3)
                    .map(|o| Granularity::ALL[(c.step + o) % 3])
                    .find_map(|g| by_confidence(c, |h| h == g))
                    .expect("pending is non-empty");
                Ok((k, 0.0))
            }
            AttackMode::Random => Ok((rng.random_range(0..c.pending.len()), 0.0)),
        }
    };
    env.rollout(&scorer, input, &prepared, labels, label_lp, spans, candidates, &mut choose)
}

/// Black-box side of one attack: the target's current list for the query and
/// the ranker that will re-rank the perturbed document.
pub struct BlackBox<'a> {
    pub target: &'a TargetRanker,
    pub corpus: &'a Corpus,
}

/// Number of top-ranked documents the pairwise loss is taken against.
pub const PAIRWISE_OTHERS: usize = 10;

impl BlackBox<'_> {
    /// 1-based position of `doc` when it replaces its original in the corpus.
    pub fn rank_of(&self, query: &Query, doc: &Document) -> Result<usize> {
        let docs: Vec<&Document> = self
            .corpus
            .docs()
            .iter()
            .map(|d| if d.id == doc.id { doc } else { d })
            .collect();
        let list = self.target.rank_documents(query, &docs, docs.len())?;
        list.position(&doc.id)
            .ok_or_else(|| Error::UnknownDocument(doc.id.clone()))
    }
}

/// The target document with the top-ranked documents of `list` as the
/// pairwise comparison set.
pub fn episode_input<'a>(corpus: &'a Corpus, query: &'a Query, list: &RankedList, doc_id: &str) -> Result<EpisodeInput<'a>> {
    let doc = corpus.get(doc_id)?;
    let others = list
        .ids()
        .iter()
        .filter(|id| **id != doc.id)
        .take(PAIRWISE_OTHERS)
        .map(|id| corpus.get(id))
        .collect::<Result<Vec<_>>>()?;
    Ok(EpisodeInput { query, doc, others })
}

/// Attacks one target and measures its black-box rank before and after.
#[allow(clippy::too_many_arguments)]
pub fn attack_target<R: Rng + ?Sized>(
    env: &Environment,
    pols: &Policies,
    black_box: &BlackBox,
    query: &Query,
    list: &RankedList,
    target: &AttackTarget,
    mode: AttackMode,
    rng: &mut R,
) -> Result<(AttackOutcome, Trajectory)> {
    let corpus = black_box.corpus;
    let input = episode_input(corpus, query, list, &target.doc_id)?;
    let doc = input.doc;
    let traj = run_mode(env, pols, &input, mode, rng)?;
    let adversarial = Document::from_tokens(
        doc.id.clone(),
        traj.final_tokens.clone(),
        traj.final_bounds.clone(),
        &corpus.vocab,
    );
    let rank_after = black_box.rank_of(query, &adversarial)?;
    let outcome = AttackOutcome {
        query_id: query.id.clone(),
        doc_id: doc.id.clone(),
        rank_before: target.rank,
        rank_after,
        budget: traj.budget_used(),
        counts: traj.granularity_counts(),
        mode: mode.to_string(),
        adversarial_text: adversarial.text,
    };
    Ok((outcome, traj))
}
