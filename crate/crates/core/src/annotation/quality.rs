use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use super::ValidityRule;
use crate::corpus::QaPair;

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct WorkerStats {
    pub worker_id: String,
    pub questions_written: usize,
    pub questions_judged_valid: usize,
    /// Verbs completed as the question writer.
    pub verbs_annotated: usize,
    /// Verbs completed as a validator.
    pub verbs_validated: usize,
    pub validation_judgments: usize,
    pub agreement_hits: usize,
    pub disqualified: bool,
}

impl WorkerStats {
    pub fn new(worker_id: impl Into<String>) -> Self {
        WorkerStats {
            worker_id: worker_id.into(),
            ..WorkerStats::default()
        }
    }

    pub fn validity_rate(&self) -> Option<f64> {
        (self.questions_written > 0)
            .then(|| self.questions_judged_valid as f64 / self.questions_written as f64)
    }

    pub fn questions_per_verb(&self) -> Option<f64> {
        (self.verbs_annotated > 0)
            .then(|| self.questions_written as f64 / self.verbs_annotated as f64)
    }

    pub fn agreement_rate(&self) -> Option<f64> {
        (self.validation_judgments > 0)
            .then(|| self.agreement_hits as f64 / self.validation_judgments as f64)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct QualityConfig {
    /// Completed verbs in a role before that role can disqualify.
    pub warmup_verbs: usize,
    pub min_validity: f64,
    pub min_questions_per_verb: f64,
    pub min_agreement: f64,
}

impl Default for QualityConfig {
    fn default() -> Self {
        QualityConfig {
            warmup_verbs: 10,
            min_validity: 0.85,
            min_questions_per_verb: 2.0,
            min_agreement: 0.85,
        }
    }
}

/// Whether judgment `index` of `qa` sides with a strict majority of all
/// judgments on the question, the writer's included: an invalid mark agrees
/// when most judgments are invalid; a valid one agrees when one of its spans
/// overlaps spans from enough other workers to form a majority with it.
pub fn judgment_agrees(qa: &QaPair, index: usize) -> bool {
    let total = qa.judgments.len();
    let mine = &qa.judgments[index];
    let others = qa
        .judgments
        .iter()
        .enumerate()
        .filter(|&(k, _)| k != index)
        .map(|(_, j)| j);
    if !mine.is_valid {
        let invalid = qa.judgments.iter().filter(|j| !j.is_valid).count();
        return 2 * invalid > total;
    }
    let others: Vec<_> = others.collect();
    mine.spans.iter().any(|s| {
        let support = others
            .iter()
            .filter(|j| j.spans.iter().any(|o| o.overlaps(s)))
            .count();
        2 * (support + 1) > total
    })
}

/// Folds one completed verb's questions into the writer's and validators'
/// statistics, then applies the disqualification thresholds. The first
/// judgment of each question is the writer's.
pub fn update_quality(
    stats: &mut BTreeMap<String, WorkerStats>,
    questions: &[QaPair],
    rule: ValidityRule,
    config: &QualityConfig,
) {
    let mut touched: Vec<String> = Vec::new();
    let mut writers: Vec<&str> = Vec::new();
    let mut validators: Vec<&str> = Vec::new();
    for qa in questions {
        let Some(writer) = qa.generator() else {
            continue;
        };
        let w = stats
            .entry(writer.worker_id.clone())
            .or_insert_with(|| WorkerStats::new(&writer.worker_id));
        w.questions_written += 1;
        if qa.is_valid_under(rule) {
            w.questions_judged_valid += 1;
        }
        writers.push(&writer.worker_id);
        for (k, j) in qa.judgments.iter().enumerate().skip(1) {
            let v = stats
                .entry(j.worker_id.clone())
                .or_insert_with(|| WorkerStats::new(&j.worker_id));
            v.validation_judgments += 1;
            if judgment_agrees(qa, k) {
                v.agreement_hits += 1;
            }
            validators.push(&j.worker_id);
        }
    }
    writers.sort_unstable();
    writers.dedup();
    validators.sort_unstable();
    validators.dedup();
    for w in writers {
        stats.get_mut(w).expect("inserted above").verbs_annotated += 1;
        touched.push(w.to_string());
    }
    for v in validators {
        stats.get_mut(v).expect("inserted above").verbs_validated += 1;
        touched.push(v.to_string());
    }
    for id in touched {
        let s = stats.get_mut(&id).expect("inserted above");
        s.disqualified |= should_disqualify(s, config);
    }
}

pub fn should_disqualify(s: &WorkerStats, config: &QualityConfig) -> bool {
    let below = |rate: Option<f64>, min: f64| rate.is_some_and(|r| r < min);
    let as_writer = s.verbs_annotated >= config.warmup_verbs
        && (below(s.validity_rate(), config.min_validity)
            || below(s.questions_per_verb(), config.min_questions_per_verb));
    let as_validator =
        s.verbs_validated >= config.warmup_verbs && below(s.agreement_rate(), config.min_agreement);
    as_writer || as_validator
}
