use serde::{Deserialize, Serialize};

use crate::attacks::{PerturbationCandidate, PerturbationSpan};
use crate::corpus::TokenId;
use crate::error::{Error, Result};

/// A candidate still waiting to be applied, in current-document coordinates.
#[derive(Clone, Debug, PartialEq)]
pub struct Pending {
    /// Index into the episode's candidate set.
    pub id: usize,
    /// Span in the original document, where the indicator output lives.
    pub original: PerturbationSpan,
    pub candidate: PerturbationCandidate,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Applied {
    pub id: usize,
    /// The candidate with its span in the coordinates it was applied at.
    pub candidate: PerturbationCandidate,
    pub removed: Vec<TokenId>,
    bounds_before: Vec<(usize, usize)>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ApplyOutcome {
    Applied,
    /// Applying would exceed the term budget; nothing changed.
    Rejected,
}

#[derive(Clone, Debug, PartialEq)]
pub struct AttackState {
    pub step: usize,
    pub tokens: Vec<TokenId>,
    pub sentence_bounds: Vec<(usize, usize)>,
    pub applied: Vec<Applied>,
    pub consumed: usize,
    pub budget: usize,
    pub remaining: Vec<Pending>,
}

impl AttackState {
    pub fn new(
        tokens: Vec<TokenId>,
        sentence_bounds: Vec<(usize, usize)>,
        candidates: Vec<PerturbationCandidate>,
        budget: usize,
    ) -> Result<Self> {
        for (i, a) in candidates.iter().enumerate() {
            a.span.validate(tokens.len())?;
            for (j, b) in candidates.iter().enumerate().skip(i + 1) {
                if a.span.overlaps(&b.span) {
                    return Err(Error::OverlappingSpans(i, j));
                }
            }
        }
        let remaining = candidates
            .into_iter()
            .enumerate()
            .map(|(id, candidate)| Pending {
                id,
                original: candidate.span,
                candidate,
            })
            .collect();
        Ok(AttackState {
            step: 0,
            tokens,
            sentence_bounds,
            applied: Vec::new(),
            consumed: 0,
            budget,
            remaining,
        })
    }

    /// Applies `remaining[index]` unless it would overflow the budget.
    /// Later spans and sentence bounds shift by the length change.
    pub fn apply(&mut self, index: usize) -> Result<ApplyOutcome> {
        let pending = self
            .remaining
            .get(index)
            .ok_or_else(|| Error::InvalidParameter(format!("no remaining candidate {index}")))?;
        let cand = &pending.candidate;
        if self.consumed + cand.length() > self.budget {
            return Ok(ApplyOutcome::Rejected);
        }
        let pending = self.remaining.remove(index);
        let cand = pending.candidate;
        let removed = cand.apply(&mut self.tokens)?;
        let (start, end) = (cand.span.start, cand.span.end);
        let delta = cand.replacement.len() as isize - (end - start) as isize;
        let shift = |p: usize| (p as isize + delta) as usize;
        let bounds_before = self.sentence_bounds.clone();
        for other in &mut self.remaining {
            if other.candidate.span.start >= end {
                other.candidate.span.start = shift(other.candidate.span.start);
                other.candidate.span.end = shift(other.candidate.span.end);
            }
        }
        // boundaries inside the replaced span collapse onto its new end
        let new_end = start + cand.replacement.len();
        let remap = |p: usize| {
            if p <= start {
                p
            } else if p >= end {
                shift(p)
            } else {
                p.min(new_end)
            }
        };
        for b in &mut self.sentence_bounds {
            *b = (remap(b.0), remap(b.1));
        }
        self.consumed += cand.length();
        self.step += 1;
        self.applied.push(Applied {
            id: pending.id,
            candidate: cand,
            removed,
            bounds_before,
        });
        Ok(ApplyOutcome::Applied)
    }

    /// Undoes the most recent application.
    pub fn undo(&mut self) -> Result<()> {
        let last = self
            .applied
            .pop()
            .ok_or_else(|| Error::InvalidParameter("nothing to undo".into()))?;
        let cand = &last.candidate;
        cand.revert(&mut self.tokens, &last.removed)?;
        let new_end = cand.span.start + cand.replacement.len();
        let delta = cand.span.end as isize - new_end as isize;
        let shift = |p: usize| (p as isize + delta) as usize;
        for other in &mut self.remaining {
            if other.candidate.span.start >= new_end {
                other.candidate.span.start = shift(other.candidate.span.start);
                other.candidate.span.end = shift(other.candidate.span.end);
            }
        }
        self.sentence_bounds = last.bounds_before;
        self.consumed -= cand.length();
        self.step -= 1;
        let mut restored = cand.clone();
        restored.span.end = restored.span.start + last.removed.len();
        self.remaining.push(Pending {
            id: last.id,
            original: restored.span,
            candidate: restored,
        });
        Ok(())
    }

    /// Undoes every application, restoring the original tokens.
    pub fn revert_all(&mut self) -> Result<()> {
        while !self.applied.is_empty() {
            self.undo()?;
        }
        self.remaining.sort_by_key(|p| p.id);
        Ok(())
    }
}
