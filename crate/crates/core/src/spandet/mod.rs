//! Unlabeled answer-span detection: a BIO tagger decoded with Viterbi and
//! an all-spans scorer with a probability threshold.

mod model;

use serde::{Deserialize, Serialize};

use crate::corpus::AnswerSpan;
use crate::dataset::VerbInstance;
use crate::metrics::{span_detection_counts, Matcher, Prf, PrfCounts};
use crate::nn::NnError;

pub use model::{BioNet, DetectorConfig, DetectorKind, SpanDetector, SpanNet, SpanScorer};

#[derive(Debug, thiserror::Error)]
pub enum SpanDetError {
    #[error("spans {0} and {1} overlap")]
    Overlap(AnswerSpan, AnswerSpan),
    #[error("span {span} outside a sentence of {len} tokens")]
    OutOfBounds { span: AnswerSpan, len: usize },
    #[error("threshold {0} outside [0, 1]")]
    Threshold(f64),
    #[error("empty development set")]
    EmptyDevSet,
    #[error("checkpoint holds a {found} model, expected {expected}")]
    WrongKind { expected: String, found: String },
    #[error("operation needs a {0} model")]
    Unsupported(&'static str),
    #[error(transparent)]
    Nn(#[from] NnError),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Tag {
    B,
    I,
    O,
}

impl Tag {
    /// Output order of the tagger.
    pub const ALL: [Tag; 3] = [Tag::B, Tag::I, Tag::O];

    pub fn index(self) -> usize {
        self as usize
    }

    pub fn may_follow(self, prev: Option<Tag>) -> bool {
        self != Tag::I || matches!(prev, Some(Tag::B | Tag::I))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct TagSequence {
    pub tags: Vec<Tag>,
    /// Log-probability of each chosen tag.
    pub log_probs: Vec<f64>,
}

impl TagSequence {
    pub fn score(&self) -> f64 {
        self.log_probs.iter().sum()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ScoredSpan {
    pub span: AnswerSpan,
    pub probability: f64,
}

/// Tag preference among equal-scoring paths.
const PREFERENCE: [Tag; 3] = [Tag::O, Tag::B, Tag::I];

/// Highest-scoring BIO-legal tag sequence under per-token distributions
/// (rows ordered B, I, O). Ties go to the path that prefers O, then B, at the
/// earliest differing position.
pub fn viterbi_decode(distributions: &[[f64; 3]]) -> TagSequence {
    let n = distributions.len();
    let logp: Vec<[f64; 3]> = distributions.iter().map(|row| row.map(f64::ln)).collect();
    // best[i][t]: best score of tokens i.. given tag t at i.
    let mut best = vec![[f64::NEG_INFINITY; 3]; n];
    for i in (0..n).rev() {
        for t in Tag::ALL {
            let tail = if i + 1 == n {
                0.0
            } else {
                Tag::ALL
                    .iter()
                    .filter(|u| u.may_follow(Some(t)))
                    .map(|u| best[i + 1][u.index()])
                    .fold(f64::NEG_INFINITY, f64::max)
            };
            best[i][t.index()] = logp[i][t.index()] + tail;
        }
    }
    let mut tags = Vec::with_capacity(n);
    let mut prev = None;
    for row in &best {
        let mut choice: Option<Tag> = None;
        for t in PREFERENCE.into_iter().filter(|t| t.may_follow(prev)) {
            if choice.is_none_or(|c| row[t.index()] > row[c.index()]) {
                choice = Some(t);
            }
        }
        let t = choice.expect("O is always allowed");
        tags.push(t);
        prev = Some(t);
    }
    let log_probs = tags
        .iter()
        .zip(&logp)
        .map(|(t, row)| row[t.index()])
        .collect();
    TagSequence { tags, log_probs }
}

/// Spans encoded by a tag sequence; a stray `I` opens a span like `B`.
pub fn tags_to_spans(tags: &[Tag]) -> Vec<AnswerSpan> {
    let mut spans = Vec::new();
    let mut open: Option<usize> = None;
    for (i, &t) in tags.iter().enumerate() {
        match t {
            Tag::B => {
                if let Some(s) = open.replace(i) {
                    spans.push(AnswerSpan::new(s, i - 1));
                }
            }
            Tag::I => {
                open.get_or_insert(i);
            }
            Tag::O => {
                if let Some(s) = open.take() {
                    spans.push(AnswerSpan::new(s, i - 1));
                }
            }
        }
    }
    if let Some(s) = open {
        spans.push(AnswerSpan::new(s, tags.len() - 1));
    }
    spans
}

pub fn spans_to_tags(spans: &[AnswerSpan], len: usize) -> Result<Vec<Tag>, SpanDetError> {
    let mut sorted = spans.to_vec();
    sorted.sort();
    for pair in sorted.windows(2) {
        if pair[0].overlaps(&pair[1]) {
            return Err(SpanDetError::Overlap(pair[0], pair[1]));
        }
    }
    let mut tags = vec![Tag::O; len];
    for span in sorted {
        if span.end >= len {
            return Err(SpanDetError::OutOfBounds { span, len });
        }
        tags[span.start] = Tag::B;
        tags[span.start + 1..=span.end]
            .iter_mut()
            .for_each(|t| *t = Tag::I);
    }
    Ok(tags)
}

/// Non-overlapping subset: earliest start first, then longest; spans
/// conflicting with an already kept one are dropped.
pub fn canonical_projection(spans: &[AnswerSpan]) -> Vec<AnswerSpan> {
    let mut order = spans.to_vec();
    order.sort_by_key(|s| (s.start, std::cmp::Reverse(s.end)));
    let mut kept: Vec<AnswerSpan> = Vec::new();
    for s in order {
        if !kept.iter().any(|k| k.overlaps(&s)) {
            kept.push(s);
        }
    }
    kept
}

fn check_tau(tau: f64) -> Result<(), SpanDetError> {
    if (0.0..=1.0).contains(&tau) {
        Ok(())
    } else {
        Err(SpanDetError::Threshold(tau))
    }
}

/// Spans with probability strictly above `tau`, in input order.
pub fn select_spans(scored: &[ScoredSpan], tau: f64) -> Result<Vec<AnswerSpan>, SpanDetError> {
    check_tau(tau)?;
    Ok(scored
        .iter()
        .filter(|s| s.probability > tau)
        .map(|s| s.span)
        .collect())
}

/// Thresholds 0.00, 0.01, …, 1.00.
pub fn threshold_grid() -> impl Iterator<Item = f64> {
    (0..=100).map(|k| k as f64 / 100.0)
}

/// Thresholds 0, `step`, 2·`step`, … up to 1 inclusive; `step` must lie in (0, 1].
pub fn threshold_grid_with_step(step: f64) -> Result<Vec<f64>, SpanDetError> {
    if !(step > 0.0 && step <= 1.0) {
        return Err(SpanDetError::Threshold(step));
    }
    let n = (1.0 / step + 1e-9).floor() as usize;
    let mut grid: Vec<f64> = (0..=n).map(|k| (k as f64 * step).min(1.0)).collect();
    if *grid.last().expect("non-empty") < 1.0 {
        grid.push(1.0);
    }
    Ok(grid)
}

/// The grid threshold with the best micro-averaged F1 over `dev` (scored
/// spans paired with their gold instance); ties go to the lowest threshold.
pub fn tune_threshold(
    dev: &[(Vec<ScoredSpan>, &VerbInstance)],
    matcher: &Matcher,
) -> Result<(f64, Prf), SpanDetError> {
    tune_threshold_on_grid(dev, matcher, &threshold_grid().collect::<Vec<_>>())
}

/// [`tune_threshold`] over an explicit ascending grid.
pub fn tune_threshold_on_grid(
    dev: &[(Vec<ScoredSpan>, &VerbInstance)],
    matcher: &Matcher,
    grid: &[f64],
) -> Result<(f64, Prf), SpanDetError> {
    if dev.is_empty() || grid.is_empty() {
        return Err(SpanDetError::EmptyDevSet);
    }
    let mut best: Option<(f64, Prf)> = None;
    for &tau in grid {
        let mut counts = PrfCounts::default();
        for (scored, inst) in dev {
            counts.add(span_detection_counts(
                &select_spans(scored, tau)?,
                &inst.gold,
                matcher,
            ));
        }
        let prf = counts.prf();
        if best.is_none_or(|(_, b)| prf.f1 > b.f1) {
            best = Some((tau, prf));
        }
    }
    Ok(best.expect("grid is non-empty"))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn s(a: usize, b: usize) -> AnswerSpan {
        AnswerSpan::new(a, b)
    }

    #[test]
    fn stepped_grids_end_at_one() {
        assert_eq!(
            threshold_grid_with_step(0.25).unwrap(),
            vec![0.0, 0.25, 0.5, 0.75, 1.0]
        );
        assert_eq!(threshold_grid_with_step(0.3).unwrap().last(), Some(&1.0));
        assert_eq!(threshold_grid_with_step(0.01).unwrap().len(), 101);
        assert!(threshold_grid_with_step(0.0).is_err());
    }

    #[test]
    fn bio_conversions() {
        use Tag::*;
        assert_eq!(tags_to_spans(&[B, I, I, O, B]), vec![s(0, 2), s(4, 4)]);
        assert!(tags_to_spans(&[O, O]).is_empty());
        assert_eq!(
            spans_to_tags(&[s(4, 4), s(0, 2)], 5).unwrap(),
            vec![B, I, I, O, B]
        );
        assert!(matches!(
            spans_to_tags(&[s(0, 2), s(2, 3)], 5),
            Err(SpanDetError::Overlap(..))
        ));
        assert!(matches!(
            spans_to_tags(&[s(3, 5)], 5),
            Err(SpanDetError::OutOfBounds { .. })
        ));
    }

    #[test]
    fn viterbi_never_starts_with_inside() {
        let d = [[0.3, 0.6, 0.1], [0.1, 0.8, 0.1]];
        let out = viterbi_decode(&d);
        assert_eq!(out.tags, vec![Tag::B, Tag::I]);
        let flat = viterbi_decode(&[[1.0 / 3.0; 3]; 4]);
        assert_eq!(flat.tags, vec![Tag::O; 4]);
        let o = viterbi_decode(&[[0.1, 0.1, 0.8]; 3]);
        assert_eq!(o.tags, vec![Tag::O; 3]);
    }

    #[test]
    fn projection_prefers_early_then_long() {
        let got = canonical_projection(&[s(2, 3), s(0, 1), s(0, 4), s(5, 6), s(6, 6)]);
        assert_eq!(got, vec![s(0, 4), s(5, 6)]);
    }

    #[test]
    fn selection_thresholds() {
        let scored = [
            ScoredSpan {
                span: s(0, 0),
                probability: 0.9,
            },
            ScoredSpan {
                span: s(1, 1),
                probability: 0.6,
            },
            ScoredSpan {
                span: s(2, 2),
                probability: 0.4,
            },
        ];
        assert_eq!(select_spans(&scored, 0.5).unwrap(), vec![s(0, 0), s(1, 1)]);
        assert!(select_spans(&scored, 1.0).unwrap().is_empty());
        assert_eq!(select_spans(&scored, 0.0).unwrap().len(), 3);
        assert!(select_spans(&scored, 1.5).is_err());
        assert!(matches!(
            tune_threshold(&[], &Matcher::exact()),
            Err(SpanDetError::EmptyDevSet)
        ));
    }
}
