use std::collections::HashMap;
use std::io::Write;

use serde::{Deserialize, Serialize};

use super::MetricsError;
use crate::annotation::{aggregate_validity, ValidityRule};
use crate::corpus::{AnswerSpan, Judgment};

/// One ranked (question, span) prediction with the human judgments of its
/// question. Items sharing `question_id` share judgments.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct HumanEvalItem {
    pub question_id: usize,
    pub probability: f64,
    pub span: AnswerSpan,
    pub judgments: Vec<Judgment>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct CurvePoint {
    /// Probability of the last item in the prefix.
    pub threshold: f64,
    pub questions_per_verb: f64,
    pub question_accuracy: f64,
    pub span_accuracy: f64,
}

/// Accuracy over every prefix of the items ranked by descending probability.
///
/// A question is correct iff its judgments are valid under `rule`; a span is
/// correct iff its question is and some validator selected exactly that span.
pub fn human_eval_curves(
    items: &[HumanEvalItem],
    verbs: usize,
    rule: ValidityRule,
) -> Result<Vec<CurvePoint>, MetricsError> {
    if verbs == 0 {
        return Err(MetricsError::InvalidInput("verb count is zero".into()));
    }
    let mut order: Vec<usize> = (0..items.len()).collect();
    order.sort_by(|&a, &b| items[b].probability.total_cmp(&items[a].probability));

    let mut question_ok: HashMap<usize, bool> = HashMap::new();
    let mut points = Vec::with_capacity(items.len());
    let (mut questions, mut correct_questions, mut correct_spans) = (0usize, 0usize, 0usize);
    for (rank, &i) in order.iter().enumerate() {
        let item = &items[i];
        let verdicts: Vec<bool> = item.judgments.iter().map(|j| j.is_valid).collect();
        let valid = aggregate_validity(&verdicts, rule).map_err(|_| {
            MetricsError::InsufficientJudgments {
                item: i,
                have: verdicts.len(),
                need: rule.required(),
            }
        })?;
        if question_ok.insert(item.question_id, valid).is_none() {
            questions += 1;
            correct_questions += valid as usize;
        }
        let selected = item
            .judgments
            .iter()
            .any(|j| j.is_valid && j.spans.contains(&item.span));
        correct_spans += (valid && selected) as usize;
        points.push(CurvePoint {
            threshold: item.probability,
            questions_per_verb: questions as f64 / verbs as f64,
            question_accuracy: correct_questions as f64 / questions as f64,
            span_accuracy: correct_spans as f64 / (rank + 1) as f64,
        });
    }
    Ok(points)
}

/// The deepest point whose questions-per-verb does not exceed `target`.
pub fn point_at_questions_per_verb(points: &[CurvePoint], target: f64) -> Option<&CurvePoint> {
    points
        .iter()
        .take_while(|p| p.questions_per_verb <= target + 1e-12)
        .last()
}

pub fn write_curve_csv(writer: impl Write, points: &[CurvePoint]) -> Result<(), MetricsError> {
    let mut out = csv::Writer::from_writer(writer);
    out.write_record([
        "threshold",
        "questions_per_verb",
        "question_accuracy",
        "span_accuracy",
    ])?;
    for p in points {
        out.write_record([
            p.threshold.to_string(),
            p.questions_per_verb.to_string(),
            p.question_accuracy.to_string(),
            p.span_accuracy.to_string(),
        ])?;
    }
    out.flush().map_err(csv::Error::from)?;
    Ok(())
}
