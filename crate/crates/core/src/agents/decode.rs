//! Span-constrained decoding of per-position granularity labels.
//!
//! One repair pass turns maximal label runs into window-compliant spans,
//! possibly downgrading positions (S to P, S or P to N). The pass is repeated
//! on the labels its own spans induce until nothing changes. Labels only
//! ever move down that chain, so the loop terminates, and the result is a
//! fixed point, which makes decoding idempotent.

use super::Label;
use crate::attacks::{Granularity, PerturbationSpan};

const P_MAX: usize = 5;
const S_MIN: usize = 6;
const S_MAX: usize = 10;

/// Decodes labels into disjoint, start-sorted spans whose lengths respect
/// {1} for W, [2, 5] for P and [6, 10] for S. Sentence spans never cross a
/// sentence start, and fewer spans than positions are returned.
pub fn decode_spans(labels: &[Label], sentence_bounds: &[(usize, usize)]) -> Vec<PerturbationSpan> {
    let mut current = labels.to_vec();
    loop {
        let mut spans = repair_pass(&current, sentence_bounds);
        if !spans.is_empty() && spans.len() >= current.len() {
            // only possible when every position is its own word span
            spans.pop();
        }
        let induced = induce_labels(&spans, current.len());
        if induced == current {
            return spans;
        }
        current = induced;
    }
}

/// Labels implied by a span list: each span's granularity over its positions,
/// N elsewhere.
pub fn induce_labels(spans: &[PerturbationSpan], len: usize) -> Vec<Label> {
    let mut labels = vec![Label::N; len];
    for s in spans {
        for l in &mut labels[s.start..s.end.min(len)] {
            *l = Label::from(s.granularity);
        }
    }
    labels
}

fn repair_pass(labels: &[Label], bounds: &[(usize, usize)]) -> Vec<PerturbationSpan> {
    let mut spans = Vec::new();
    let mut i = 0;
    while i < labels.len() {
        let label = labels[i];
        let mut j = i + 1;
        while j < labels.len() && labels[j] == label {
            j += 1;
        }
        match label {
            Label::N => {}
            Label::W => spans.extend((i..j).map(|p| PerturbationSpan::new(Granularity::Word, p, p + 1))),
            Label::P => phrase_chunks(i, j, &mut spans),
            Label::S => {
                let mut start = i;
                for cut in sentence_cuts(i, j, bounds) {
                    sentence_chunks(start, cut, &mut spans);
                    start = cut;
                }
                sentence_chunks(start, j, &mut spans);
            }
        }
        i = j;
    }
    spans
}

/// Sentence starts strictly inside `(start, end)`.
fn sentence_cuts(start: usize, end: usize, bounds: &[(usize, usize)]) -> Vec<usize> {
    let mut cuts: Vec<usize> = bounds
        .iter()
        .flat_map(|&(s, e)| [s, e])
        .filter(|&p| p > start && p < end)
        .collect();
    cuts.sort_unstable();
    cuts.dedup();
    cuts
}

fn phrase_chunks(start: usize, end: usize, out: &mut Vec<PerturbationSpan>) {
    let mut s = start;
    while end - s >= 2 {
        let e = (s + P_MAX).min(end);
        out.push(PerturbationSpan::new(Granularity::Phrase, s, e));
        s = e;
    }
}

fn sentence_chunks(start: usize, end: usize, out: &mut Vec<PerturbationSpan>) {
    let mut s = start;
    while end - s >= S_MIN {
        let e = (s + S_MAX).min(end);
        out.push(PerturbationSpan::new(Granularity::Sentence, s, e));
        s = e;
    }
    if end - s >= 2 {
        phrase_chunks(s, end, out);
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use Label::*;

    fn triples(spans: &[PerturbationSpan]) -> Vec<(usize, usize, char)> {
        spans.iter().map(|s| (s.start, s.end, s.granularity.symbol())).collect()
    }

    #[test]
    fn direct_merge() {
        let s = decode_spans(&[W, N, P, P, P, N, N], &[(0, 7)]);
        assert_eq!(triples(&s), vec![(0, 1, 'W'), (2, 5, 'P')]);
    }

    #[test]
    fn long_phrase_run_splits_five_then_two() {
        let s = decode_spans(&[P; 7], &[(0, 7)]);
        assert_eq!(triples(&s), vec![(0, 5, 'P'), (5, 7, 'P')]);
        let s = decode_spans(&[P; 6], &[(0, 6)]);
        assert_eq!(triples(&s), vec![(0, 5, 'P')]);
    }

    #[test]
    fn short_sentence_run_becomes_phrase() {
        let mut labels = vec![N; 8];
        labels[2..6].fill(S);
        assert_eq!(triples(&decode_spans(&labels, &[(0, 8)])), vec![(2, 6, 'P')]);
        let mut labels = vec![N; 8];
        labels[3] = S;
        assert!(decode_spans(&labels, &[(0, 8)]).is_empty());
    }

    #[test]
    fn long_sentence_run_splits_by_tens() {
        let s = decode_spans(&[S; 17], &[(0, 17)]);
        assert_eq!(triples(&s), vec![(0, 10, 'S'), (10, 17, 'S')]);
        let s = decode_spans(&[S; 14], &[(0, 14)]);
        assert_eq!(triples(&s), vec![(0, 10, 'S'), (10, 14, 'P')]);
    }

    #[test]
    fn sentence_spans_respect_boundaries() {
        let s = decode_spans(&[S; 14], &[(0, 8), (8, 14)]);
        assert_eq!(triples(&s), vec![(0, 8, 'S'), (8, 14, 'S')]);
        let s = decode_spans(&[S; 10], &[(0, 3), (3, 10)]);
        assert_eq!(triples(&s), vec![(0, 3, 'P'), (3, 10, 'S')]);
    }

    #[test]
    fn relabeled_phrase_merges_with_neighbouring_phrase() {
        // S-run of 3 becomes P and then joins the P-run next to it
        let labels = [P, P, S, S, S, N];
        let s = decode_spans(&labels, &[(0, 6)]);
        assert_eq!(triples(&s), vec![(0, 5, 'P')]);
    }

    #[test]
    fn all_word_labels_keep_fewer_spans_than_positions() {
        let s = decode_spans(&[W; 4], &[(0, 4)]);
        assert_eq!(s.len(), 3);
        assert!(decode_spans(&[W], &[(0, 1)]).is_empty());
    }
}
