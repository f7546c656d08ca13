//! Target selection, evaluation modes, metrics, screening and reports.

mod metrics;
mod modes;
mod report;
mod spam;
mod targets;

use std::collections::HashMap;

use rayon::prelude::*;

pub use metrics::{compute_metrics, AttackOutcome, MetricsReport, DEFAULT_KS};
pub use modes::{attack_target, episode_input, restrict_to, run_mode, AttackMode, BlackBox, PAIRWISE_OTHERS};
pub use report::{render_outcomes, render_screening, render_summary, Report};
pub use spam::{screen_outcomes, spamicity_score, Screening, DEFAULT_SPAM_WINDOW};
pub use targets::{select_targets, AttackTarget, Difficulty, EASY_RANKS, LIST_DEPTH};

use crate::agents::Policies;
use crate::corpus::{Corpus, Query};
use crate::env::EpisodeInput;
use crate::env::{episode_rng, Environment};
use crate::error::{Error, Result};
use crate::ranker::{RankedList, TargetRanker};

/// Attacks every target in parallel. Target `i` draws from its own stream of
/// `seed`, so results do not depend on thread scheduling.
#[allow(clippy::too_many_arguments)]
pub fn run_attacks(
    env: &Environment,
    pols: &Policies,
    black_box: &BlackBox,
    queries: &[Query],
    lists: &[RankedList],
    targets: &[AttackTarget],
    mode: AttackMode,
    seed: u64,
) -> Result<Vec<AttackOutcome>> {
    let queries: HashMap<&str, &Query> = queries.iter().map(|q| (q.id.as_str(), q)).collect();
    let lists: HashMap<&str, &RankedList> = lists.iter().map(|l| (l.query_id.as_str(), l)).collect();
    targets
        .par_iter()
        .enumerate()
        .map(|(i, t)| {
            let q = queries
                .get(t.query_id.as_str())
                .ok_or_else(|| Error::InvalidParameter(format!("unknown query `{}`", t.query_id)))?;
            let list = lists
                .get(t.query_id.as_str())
                .ok_or_else(|| Error::InvalidParameter(format!("no ranked list for `{}`", t.query_id)))?;
            let mut rng = episode_rng(seed, 0, i);
            attack_target(env, pols, black_box, q, list, t, mode, &mut rng).map(|(o, _)| o)
        })
        .collect()
}

/// The target's top-`LIST_DEPTH` list for every query, as the attacker sees it.
pub fn ranked_lists(target: &TargetRanker, queries: &[Query], corpus: &Corpus) -> Result<Vec<RankedList>> {
    let ids = corpus.ids();
    let depth = LIST_DEPTH.min(ids.len());
    queries.par_iter().map(|q| target.rank(q, corpus, &ids, depth)).collect()
}

/// Episode inputs for a set of targets, looked up by query id.
pub fn target_inputs<'a>(
    corpus: &'a Corpus,
    queries: &'a [Query],
    lists: &[RankedList],
    targets: &[AttackTarget],
) -> Result<Vec<EpisodeInput<'a>>> {
    let queries: HashMap<&str, &'a Query> = queries.iter().map(|q| (q.id.as_str(), q)).collect();
    let lists: HashMap<&str, &RankedList> = lists.iter().map(|l| (l.query_id.as_str(), l)).collect();
    targets
        .iter()
        .map(|t| {
            let q = queries
                .get(t.query_id.as_str())
                .ok_or_else(|| Error::InvalidParameter(format!("unknown query `{}`", t.query_id)))?;
            let l = lists
                .get(t.query_id.as_str())
                .ok_or_else(|| Error::InvalidParameter(format!("no ranked list for `{}`", t.query_id)))?;
            episode_input(corpus, q, l, &t.doc_id)
        })
        .collect()
}
