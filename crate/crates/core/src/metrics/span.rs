use serde::{Deserialize, Serialize};

use super::{max_bipartite_matching, MetricsError, Prf, PrfCounts};
use crate::corpus::{AnswerSpan, ValidityPolicy, VerbEntry};
use crate::grammar::QuestionSlots;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum MatchKind {
    Exact,
    Iou,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct Matcher {
    pub kind: MatchKind,
    pub iou_threshold: f64,
}

impl Matcher {
    pub fn exact() -> Self {
        Matcher {
            kind: MatchKind::Exact,
            iou_threshold: 0.5,
        }
    }

    pub fn iou(threshold: f64) -> Result<Self, MetricsError> {
        if !(threshold > 0.0 && threshold <= 1.0) {
            return Err(MetricsError::Threshold(threshold));
        }
        Ok(Matcher {
            kind: MatchKind::Iou,
            iou_threshold: threshold,
        })
    }
}

impl Default for Matcher {
    fn default() -> Self {
        Matcher::exact()
    }
}

/// Token intersection over union.
pub fn iou(a: &AnswerSpan, b: &AnswerSpan) -> f64 {
    a.intersection_len(b) as f64 / a.union_len(b) as f64
}

/// Exact equality, or IOU at or above the threshold.
pub fn span_match(a: &AnswerSpan, b: &AnswerSpan, matcher: &Matcher) -> bool {
    match matcher.kind {
        MatchKind::Exact => a == b,
        MatchKind::Iou => iou(a, b) >= matcher.iou_threshold,
    }
}

/// A gold question with the union of its annotators' answer spans.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct GoldQuestion {
    pub slots: QuestionSlots,
    pub spans: Vec<AnswerSpan>,
}

/// Questions of `entry` that are valid under `policy`, with all their spans.
pub fn gold_questions(entry: &VerbEntry, policy: &ValidityPolicy) -> Vec<GoldQuestion> {
    entry
        .qa_pairs
        .iter()
        .filter(|qa| qa.is_valid_under(policy.rule_for(qa.source)))
        .map(|qa| GoldQuestion {
            slots: qa.slots.clone(),
            spans: qa.all_spans(),
        })
        .collect()
}

/// Precision counts each predicted span once if it matches any gold answer;
/// recall is a maximum matching between predicted spans and gold questions.
pub fn span_detection_counts(
    predicted: &[AnswerSpan],
    gold: &[GoldQuestion],
    matcher: &Matcher,
) -> PrfCounts {
    let adjacency: Vec<Vec<usize>> = predicted
        .iter()
        .map(|p| {
            (0..gold.len())
                .filter(|&q| gold[q].spans.iter().any(|g| span_match(p, g, matcher)))
                .collect()
        })
        .collect();
    PrfCounts {
        predicted: predicted.len(),
        predicted_correct: adjacency.iter().filter(|edges| !edges.is_empty()).count(),
        gold: gold.len(),
        gold_matched: max_bipartite_matching(&adjacency, gold.len()).size,
    }
}

pub fn span_detection_prf(
    predicted: &[AnswerSpan],
    gold: &[GoldQuestion],
    matcher: &Matcher,
) -> Prf {
    span_detection_counts(predicted, gold, matcher).prf()
}

/// A predicted (question, span) item is correct iff a gold question with the
/// same slots has a matching answer. Recall matches items to gold questions.
pub fn joint_counts(
    predicted: &[(QuestionSlots, AnswerSpan)],
    gold: &[GoldQuestion],
    matcher: &Matcher,
) -> PrfCounts {
    let adjacency: Vec<Vec<usize>> = predicted
        .iter()
        .map(|(slots, span)| {
            (0..gold.len())
                .filter(|&q| {
                    gold[q].slots == *slots
                        && gold[q].spans.iter().any(|g| span_match(span, g, matcher))
                })
                .collect()
        })
        .collect();
    PrfCounts {
        predicted: predicted.len(),
        predicted_correct: adjacency.iter().filter(|edges| !edges.is_empty()).count(),
        gold: gold.len(),
        gold_matched: max_bipartite_matching(&adjacency, gold.len()).size,
    }
}

pub fn joint_prf(
    predicted: &[(QuestionSlots, AnswerSpan)],
    gold: &[GoldQuestion],
    matcher: &Matcher,
) -> Prf {
    joint_counts(predicted, gold, matcher).prf()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grammar::{inflect, Grammar, Lexicon};

    fn s(a: usize, b: usize) -> AnswerSpan {
        AnswerSpan::new(a, b)
    }

    fn q(text: &str) -> QuestionSlots {
        Grammar::standard()
            .parse_question(text, &inflect("blame", &Lexicon::builtin()))
            .unwrap()
    }

    #[test]
    fn match_examples() {
        let iou5 = Matcher::iou(0.5).unwrap();
        assert!(span_match(&s(2, 5), &s(2, 5), &iou5));
        assert_eq!(iou(&s(2, 5), &s(2, 5)), 1.0);
        assert!(!span_match(&s(0, 3), &s(2, 5), &iou5));
        assert!((iou(&s(0, 3), &s(2, 5)) - 2.0 / 6.0).abs() < 1e-12);
        assert!(span_match(&s(1, 4), &s(2, 4), &iou5));
        // 2/4 sits exactly on the threshold
        assert!(span_match(&s(0, 3), &s(0, 1), &iou5));
        assert!(Matcher::iou(0.0).is_err());
        assert!(Matcher::iou(1.5).is_err());
    }

    #[test]
    fn detection_examples() {
        let gold = vec![
            GoldQuestion {
                slots: q("Who blamed someone?"),
                spans: vec![s(0, 1)],
            },
            GoldQuestion {
                slots: q("Who did someone blame?"),
                spans: vec![s(3, 4), s(4, 4)],
            },
        ];
        let exact = Matcher::exact();
        let perfect = span_detection_prf(&[s(0, 1), s(4, 4)], &gold, &exact);
        assert_eq!(
            (perfect.precision, perfect.recall, perfect.f1),
            (1.0, 1.0, 1.0)
        );

        let shared = vec![
            GoldQuestion {
                slots: q("Who blamed someone?"),
                spans: vec![s(0, 1)],
            },
            GoldQuestion {
                slots: q("Who did someone blame?"),
                spans: vec![s(0, 1)],
            },
        ];
        let one = span_detection_prf(&[s(0, 1)], &shared, &exact);
        assert_eq!((one.precision, one.recall), (1.0, 0.5));

        let none = span_detection_prf(&[], &gold, &exact);
        assert_eq!((none.precision, none.recall, none.f1), (1.0, 0.0, 0.0));
    }

    #[test]
    fn joint_requires_both() {
        let gold = vec![GoldQuestion {
            slots: q("Who blamed someone?"),
            spans: vec![s(0, 1)],
        }];
        let exact = Matcher::exact();
        let right = joint_prf(&[(q("Who blamed someone?"), s(0, 1))], &gold, &exact);
        assert_eq!((right.precision, right.recall, right.f1), (1.0, 1.0, 1.0));
        let wrong_question = joint_counts(&[(q("Who did someone blame?"), s(0, 1))], &gold, &exact);
        assert_eq!(wrong_question.predicted_correct, 0);
        assert_eq!(wrong_question.gold_matched, 0);
    }
}
