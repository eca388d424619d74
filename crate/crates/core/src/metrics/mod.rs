//! Evaluation: span matching with bipartite-matching recall, question
//! accuracy, joint scores, annotator agreement and human-evaluation curves.

mod agreement;
mod human;
mod matching;
mod question;
mod span;

use serde::{Deserialize, Serialize};

pub use agreement::{agreement_kappa, fleiss_kappa, span_agreement_rate};
pub use human::{
    human_eval_curves, point_at_questions_per_verb, write_curve_csv, CurvePoint, HumanEvalItem,
};
pub use matching::{max_bipartite_matching, Matching};
pub use question::{question_accuracy, QuestionAccuracy, QuestionScores};
pub use span::{
    gold_questions, iou, joint_counts, joint_prf, span_detection_counts, span_detection_prf,
    span_match, GoldQuestion, MatchKind, Matcher,
};

#[derive(Debug, thiserror::Error)]
pub enum MetricsError {
    #[error("chance agreement is 1; kappa is undefined")]
    DegenerateKappa,
    #[error("invalid input: {0}")]
    InvalidInput(String),
    #[error("item {item} has {have} judgments, need {need}")]
    InsufficientJudgments {
        item: usize,
        have: usize,
        need: usize,
    },
    #[error("iou threshold {0} outside (0, 1]")]
    Threshold(f64),
    #[error(transparent)]
    Csv(#[from] csv::Error),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Prf {
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
}

impl Prf {
    /// Harmonic mean completion; F is 0 when both P and R are 0.
    pub fn new(precision: f64, recall: f64) -> Self {
        let f1 = if precision + recall > 0.0 {
            2.0 * precision * recall / (precision + recall)
        } else {
            0.0
        };
        Prf {
            precision,
            recall,
            f1,
        }
    }
}

/// Micro-averaged counts behind a [`Prf`].
///
/// With no predictions precision is 1 and recall 0; with no gold items recall
/// is 1.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct PrfCounts {
    pub predicted: usize,
    pub predicted_correct: usize,
    pub gold: usize,
    pub gold_matched: usize,
}

impl PrfCounts {
    pub fn add(&mut self, other: PrfCounts) {
        self.predicted += other.predicted;
        self.predicted_correct += other.predicted_correct;
        self.gold += other.gold;
        self.gold_matched += other.gold_matched;
    }

    pub fn prf(&self) -> Prf {
        if self.predicted == 0 {
            return Prf {
                precision: 1.0,
                recall: 0.0,
                f1: 0.0,
            };
        }
        let precision = self.predicted_correct as f64 / self.predicted as f64;
        let recall = if self.gold == 0 {
            1.0
        } else {
            self.gold_matched as f64 / self.gold as f64
        };
        Prf::new(precision, recall)
    }
}

impl std::iter::Sum for PrfCounts {
    fn sum<I: Iterator<Item = PrfCounts>>(iter: I) -> Self {
        let mut total = PrfCounts::default();
        for c in iter {
            total.add(c);
        }
        total
    }
}
