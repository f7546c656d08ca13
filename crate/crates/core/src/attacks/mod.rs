//! Single-granular perturbation generators: word synonyms, corpus phrases and
//! greedy sentence triggers, each picking the surrogate-optimal replacement
//! for one vulnerable span.

mod tables;

use std::cmp::Ordering;
use std::fmt;
use std::ops::RangeInclusive;

use serde::{Deserialize, Serialize};

pub use tables::{Phrase, PhraseTable, SynonymTable, MAX_PHRASE_LEN, MIN_PHRASE_LEN};

use crate::corpus::{BigramLm, Query, TokenId, UNK};
use crate::error::{Error, Result};
use crate::linalg::{axpy, dot};
use crate::ranker::QueryScorer;

pub const DEFAULT_TOP_N: usize = 20;
pub const DEFAULT_SHORTLIST: usize = 200;
pub const DEFAULT_FLUENCY_WEIGHT: f64 = 0.01;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Granularity {
    #[serde(rename = "W")]
    Word,
    #[serde(rename = "P")]
    Phrase,
    #[serde(rename = "S")]
    Sentence,
}

impl Granularity {
    pub const ALL: [Granularity; 3] = [Granularity::Word, Granularity::Phrase, Granularity::Sentence];

    /// Admissible span / replacement lengths.
    pub fn window(self) -> RangeInclusive<usize> {
        match self {
            Granularity::Word => 1..=1,
            Granularity::Phrase => 2..=5,
            Granularity::Sentence => 6..=10,
        }
    }

    pub fn symbol(self) -> char {
        match self {
            Granularity::Word => 'W',
            Granularity::Phrase => 'P',
            Granularity::Sentence => 'S',
        }
    }

    pub fn from_symbol(c: char) -> Option<Self> {
        match c.to_ascii_uppercase() {
            'W' => Some(Granularity::Word),
            'P' => Some(Granularity::Phrase),
            'S' => Some(Granularity::Sentence),
            _ => None,
        }
    }
}

impl fmt::Display for Granularity {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.symbol())
    }
}

/// A vulnerable region `[start, end)` of the document.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct PerturbationSpan {
    pub granularity: Granularity,
    pub start: usize,
    pub end: usize,
    pub confidence: f64,
}

impl PerturbationSpan {
    pub fn new(granularity: Granularity, start: usize, end: usize) -> Self {
        PerturbationSpan {
            granularity,
            start,
            end,
            confidence: 1.0,
        }
    }

    pub fn len(&self) -> usize {
        self.end - self.start
    }

    pub fn is_empty(&self) -> bool {
        self.end <= self.start
    }

    pub fn overlaps(&self, other: &PerturbationSpan) -> bool {
        self.start < other.end && other.start < self.end
    }

    /// Bounds and length-window check against a document of length `len`.
    pub fn validate(&self, len: usize) -> Result<()> {
        if self.start >= self.end || self.end > len {
            return Err(Error::SpanOutOfBounds {
                start: self.start,
                end: self.end,
                len,
            });
        }
        if !self.granularity.window().contains(&self.len()) {
            return Err(Error::InvalidParameter(format!(
                "{} span of length {} is outside {:?}",
                self.granularity,
                self.len(),
                self.granularity.window()
            )));
        }
        Ok(())
    }
}

/// A concrete replacement for one span.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PerturbationCandidate {
    pub span: PerturbationSpan,
    pub replacement: Vec<TokenId>,
    /// The replacement reproduces the original span.
    pub no_op: bool,
    /// Surrogate score of the document with only this edit applied.
    pub score: f64,
}

impl PerturbationCandidate {
    /// `|p|`, the number of manipulated terms charged to the budget.
    pub fn length(&self) -> usize {
        self.replacement.len()
    }

    /// Replaces the span in `tokens`, returning the removed tokens.
    pub fn apply(&self, tokens: &mut Vec<TokenId>) -> Result<Vec<TokenId>> {
        if self.span.end > tokens.len() || self.span.start >= self.span.end {
            return Err(Error::SpanOutOfBounds {
                start: self.span.start,
                end: self.span.end,
                len: tokens.len(),
            });
        }
        Ok(tokens
            .splice(self.span.start..self.span.end, self.replacement.iter().copied())
            .collect())
    }

    /// Inverse of [`PerturbationCandidate::apply`].
    pub fn revert(&self, tokens: &mut Vec<TokenId>, removed: &[TokenId]) -> Result<()> {
        let end = self.span.start + self.replacement.len();
        if end > tokens.len() || tokens[self.span.start..end] != self.replacement[..] {
            return Err(Error::InvalidParameter("candidate is not applied at its span".into()));
        }
        tokens.splice(self.span.start..end, removed.iter().copied());
        Ok(())
    }
}

/// One (surrogate, query, document) triple with cached scoring state.
pub struct AttackContext<'a> {
    scorer: &'a QueryScorer<'a>,
    query: &'a Query,
    tokens: &'a [TokenId],
    sum: Vec<f64>,
    base: f64,
}

impl<'a> AttackContext<'a> {
    pub fn new(scorer: &'a QueryScorer<'a>, query: &'a Query, tokens: &'a [TokenId]) -> Result<Self> {
        if tokens.is_empty() {
            return Err(Error::EmptySequence);
        }
        let sum = scorer.sum(tokens);
        let base = scorer.score_sum(&sum, tokens.len());
        Ok(AttackContext {
            scorer,
            query,
            tokens,
            sum,
            base,
        })
    }

    pub fn query(&self) -> &Query {
        self.query
    }

    pub fn tokens(&self) -> &[TokenId] {
        self.tokens
    }

    pub fn base_score(&self) -> f64 {
        self.base
    }

    /// Surrogate score with `tokens[start..end]` replaced by `replacement`.
    pub fn score_replaced(&self, start: usize, end: usize, replacement: &[TokenId]) -> f64 {
        let mut sum = self.span_removed(start, end);
        for &t in replacement {
            axpy(1.0, self.scorer.projection(t), &mut sum);
        }
        self.scorer
            .score_sum(&sum, self.tokens.len() - (end - start) + replacement.len())
    }

    fn span_removed(&self, start: usize, end: usize) -> Vec<f64> {
        let mut sum = self.sum.clone();
        for &t in &self.tokens[start..end] {
            axpy(-1.0, self.scorer.projection(t), &mut sum);
        }
        sum
    }

    /// Vocabulary ranked by alignment of each embedding with the score
    /// gradient at the current document mean (ties by id, `<unk>` excluded).
    pub fn salient_tokens(&self, n: usize) -> Result<Vec<TokenId>> {
        let ranker = self.scorer.ranker();
        let eq = ranker.mean_embedding(&self.query.tokens)?;
        let ed = ranker.mean_embedding(self.tokens)?;
        let (_, _, ded) = ranker.score_and_mean_grads(&eq, &ed);
        let mut scored: Vec<(f64, TokenId)> = (0..ranker.vocab_size() as TokenId)
            .filter(|&t| t != UNK)
            .map(|t| (dot(&ded, ranker.embedding(t)), t))
            .collect();
        scored.sort_by(|a, b| b.0.total_cmp(&a.0).then(a.1.cmp(&b.1)));
        scored.truncate(n);
        Ok(scored.into_iter().map(|(_, t)| t).collect())
    }

    fn check(&self, span: &PerturbationSpan, expected: Granularity) -> Result<()> {
        if span.granularity != expected {
            return Err(Error::InvalidParameter(format!(
                "expected a {expected} span, got {}",
                span.granularity
            )));
        }
        span.validate(self.tokens.len())
    }

    fn no_op(&self, span: &PerturbationSpan) -> PerturbationCandidate {
        PerturbationCandidate {
            span: *span,
            replacement: self.tokens[span.start..span.end].to_vec(),
            no_op: true,
            score: self.base,
        }
    }
}

/// Higher score wins; equal scores go to the lexicographically smaller sequence.
fn better(score: f64, seq: &[TokenId], best: &Option<(f64, Vec<TokenId>)>) -> bool {
    match best {
        None => true,
        Some((s, b)) => match score.total_cmp(s) {
            Ordering::Greater => true,
            Ordering::Equal => seq < b.as_slice(),
            Ordering::Less => false,
        },
    }
}

fn pick<'s>(
    ctx: &AttackContext,
    span: &PerturbationSpan,
    pool: impl Iterator<Item = &'s [TokenId]>,
) -> PerturbationCandidate {
    let mut best: Option<(f64, Vec<TokenId>)> = None;
    for seq in pool {
        let s = ctx.score_replaced(span.start, span.end, seq);
        if better(s, seq, &best) {
            best = Some((s, seq.to_vec()));
        }
    }
    match best {
        None => ctx.no_op(span),
        Some((score, replacement)) => PerturbationCandidate {
            no_op: replacement == ctx.tokens[span.start..span.end],
            span: *span,
            replacement,
            score,
        },
    }
}

/// Best of the first `top_n` synonyms of the span token.
pub fn word_substitute(
    ctx: &AttackContext,
    span: &PerturbationSpan,
    syn: &SynonymTable,
    top_n: usize,
) -> Result<PerturbationCandidate> {
    ctx.check(span, Granularity::Word)?;
    let token = ctx.tokens[span.start];
    let pool: Vec<[TokenId; 1]> = syn.get(token).iter().take(top_n).map(|&s| [s]).collect();
    Ok(pick(ctx, span, pool.iter().map(|s| s.as_slice())))
}

/// Lengths a phrase replacement may take for a span of length `len`.
pub fn phrase_window(len: usize) -> RangeInclusive<usize> {
    len.saturating_sub(1).max(MIN_PHRASE_LEN)..=(len + 1).min(MAX_PHRASE_LEN)
}

/// Best of the `top_n` query-overlap-ranked phrases of compatible length.
pub fn phrase_substitute(
    ctx: &AttackContext,
    span: &PerturbationSpan,
    phrases: &PhraseTable,
    top_n: usize,
) -> Result<PerturbationCandidate> {
    let order = phrases.ranked_for(ctx.query);
    phrase_substitute_ranked(ctx, span, phrases, &order, top_n)
}

/// The phrase pool [`phrase_substitute`] enumerates.
pub fn phrase_pool<'p>(
    span: &PerturbationSpan,
    phrases: &'p PhraseTable,
    order: &[usize],
    top_n: usize,
) -> Vec<&'p [TokenId]> {
    let window = phrase_window(span.len());
    order
        .iter()
        .map(|&i| phrases.entries()[i].tokens.as_slice())
        .filter(|p| window.contains(&p.len()))
        .take(top_n)
        .collect()
}

fn phrase_substitute_ranked(
    ctx: &AttackContext,
    span: &PerturbationSpan,
    phrases: &PhraseTable,
    order: &[usize],
    top_n: usize,
) -> Result<PerturbationCandidate> {
    ctx.check(span, Granularity::Phrase)?;
    let pool = phrase_pool(span, phrases, order, top_n);
    Ok(pick(ctx, span, pool.into_iter()))
}

/// Greedy left-to-right trigger of exactly `len_target` tokens drawn from the
/// salient shortlist. Each step maximizes `gain - fluency_weight * nll`, where
/// `nll` is the bigram cost of the new token after its predecessor. An
/// infinite weight ignores the gain.
pub fn sentence_trigger(
    ctx: &AttackContext,
    span: &PerturbationSpan,
    lm: &BigramLm,
    len_target: usize,
    fluency_weight: f64,
    shortlist: usize,
) -> Result<PerturbationCandidate> {
    ctx.check(span, Granularity::Sentence)?;
    let shortlist = ctx.salient_tokens(shortlist)?;
    sentence_trigger_from(ctx, span, lm, len_target, fluency_weight, &shortlist)
}

/// [`sentence_trigger`] over an explicit shortlist.
pub fn sentence_trigger_from(
    ctx: &AttackContext,
    span: &PerturbationSpan,
    lm: &BigramLm,
    len_target: usize,
    fluency_weight: f64,
    shortlist: &[TokenId],
) -> Result<PerturbationCandidate> {
    ctx.check(span, Granularity::Sentence)?;
    if !Granularity::Sentence.window().contains(&len_target) {
        return Err(Error::InvalidParameter(format!("trigger length {len_target} outside [6, 10]")));
    }
    if shortlist.is_empty() {
        return Ok(ctx.no_op(span));
    }
    if fluency_weight.is_nan() || fluency_weight < 0.0 {
        return Err(Error::InvalidParameter(format!("fluency weight {fluency_weight}")));
    }
    let scorer = ctx.scorer;
    let mut partial = ctx.span_removed(span.start, span.end);
    let rest = ctx.tokens.len() - span.len();
    let mut prev = (span.start > 0).then(|| ctx.tokens[span.start - 1]);
    let mut trigger = Vec::with_capacity(len_target);
    let mut trial = vec![0.0; partial.len()];
    for _ in 0..len_target {
        let len = rest + trigger.len() + 1;
        let mut best: Option<(f64, TokenId)> = None;
        for &v in shortlist {
            let nll = -lm.log_prob(prev, v);
            let objective = if fluency_weight.is_infinite() {
                -nll
            } else {
                trial.copy_from_slice(&partial);
                axpy(1.0, scorer.projection(v), &mut trial);
                let gain = scorer.score_sum(&trial, len) - ctx.base;
                gain - fluency_weight * nll
            };
            let wins = match best {
                None => true,
                Some((o, t)) => objective > o || (objective == o && v < t),
            };
            if wins {
                best = Some((objective, v));
            }
        }
        let (_, v) = best.expect("non-empty shortlist");
        axpy(1.0, scorer.projection(v), &mut partial);
        trigger.push(v);
        prev = Some(v);
    }
    let score = scorer.score_sum(&partial, rest + trigger.len());
    Ok(PerturbationCandidate {
        no_op: trigger == ctx.tokens[span.start..span.end],
        span: *span,
        replacement: trigger,
        score,
    })
}

#[derive(Clone, Debug, Default)]
pub struct AttackTables {
    pub synonyms: SynonymTable,
    pub phrases: PhraseTable,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct GeneratorConfig {
    pub top_n: usize,
    pub shortlist: usize,
    pub fluency_weight: f64,
}

impl Default for GeneratorConfig {
    fn default() -> Self {
        GeneratorConfig {
            top_n: DEFAULT_TOP_N,
            shortlist: DEFAULT_SHORTLIST,
            fluency_weight: DEFAULT_FLUENCY_WEIGHT,
        }
    }
}

/// One candidate per span, in span order (the candidate set ℙ).
pub fn generate_candidates(
    ctx: &AttackContext,
    spans: &[PerturbationSpan],
    tables: &AttackTables,
    lm: &BigramLm,
    cfg: &GeneratorConfig,
) -> Result<Vec<PerturbationCandidate>> {
    for (i, a) in spans.iter().enumerate() {
        for (j, b) in spans.iter().enumerate().skip(i + 1) {
            if a.overlaps(b) {
                return Err(Error::OverlappingSpans(i, j));
            }
        }
    }
    let mut order = None;
    let mut shortlist = None;
    spans
        .iter()
        .map(|span| match span.granularity {
            Granularity::Word => word_substitute(ctx, span, &tables.synonyms, cfg.top_n),
            Granularity::Phrase => {
                let order = order.get_or_insert_with(|| tables.phrases.ranked_for(ctx.query));
                phrase_substitute_ranked(ctx, span, &tables.phrases, order, cfg.top_n)
            }
            Granularity::Sentence => {
                if shortlist.is_none() {
                    shortlist = Some(ctx.salient_tokens(cfg.shortlist)?);
                }
                let len_target = span.len().clamp(6, 10);
                sentence_trigger_from(
                    ctx,
                    span,
                    lm,
                    len_target,
                    cfg.fluency_weight,
                    shortlist.as_deref().unwrap_or_default(),
                )
            }
        })
        .collect()
}
