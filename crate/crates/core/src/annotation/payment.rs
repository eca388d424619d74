use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use super::AnnotationError;
use crate::corpus::{QaSource, SentenceRecord, ValidityPolicy};

/// Which pay schedule a task follows.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub enum PaymentKind {
    Generation,
    Validation,
    ExpansionValidation,
}

/// Cents paid for one task covering `questions` questions.
pub fn compute_payment(kind: PaymentKind, questions: i64) -> Result<u64, AnnotationError> {
    if questions < 0 {
        return Err(AnnotationError::NegativeCount(questions));
    }
    let k = questions as u64;
    Ok(match kind {
        PaymentKind::Generation => {
            if k == 0 {
                return Err(AnnotationError::EmptyGeneration);
            }
            5 + (2..=k).map(|i| 5 + (i - 2)).sum::<u64>()
        }
        PaymentKind::Validation => 8 + 2 * k.saturating_sub(4),
        PaymentKind::ExpansionValidation => 2 * k,
    })
}

/// One payment owed to a worker.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct PaymentRecord {
    pub task_id: String,
    pub worker_id: String,
    pub kind: PaymentKind,
    pub questions: usize,
    pub cents: u64,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct CostReport {
    pub total_cents: u64,
    pub generation_cents: u64,
    pub validation_cents: u64,
    pub expansion_cents: u64,
    pub verbs: usize,
    pub valid_questions: usize,
    pub cents_per_verb: f64,
    pub cents_per_valid_question: f64,
}

impl CostReport {
    fn add(&mut self, kind: PaymentKind, cents: u64) {
        self.total_cents += cents;
        match kind {
            PaymentKind::Generation => self.generation_cents += cents,
            PaymentKind::Validation => self.validation_cents += cents,
            PaymentKind::ExpansionValidation => self.expansion_cents += cents,
        }
    }

    fn finish(mut self) -> Self {
        let ratio = |a: u64, b: usize| if b == 0 { 0.0 } else { a as f64 / b as f64 };
        self.cents_per_verb = ratio(self.total_cents, self.verbs);
        self.cents_per_valid_question = ratio(self.total_cents, self.valid_questions);
        self
    }
}

/// Totals a list of task payments.
pub fn payments_cost(
    payments: &[PaymentRecord],
    verbs: usize,
    valid_questions: usize,
) -> CostReport {
    let mut report = CostReport {
        verbs,
        valid_questions,
        ..CostReport::default()
    };
    for p in payments {
        report.add(p.kind, p.cents);
    }
    report.finish()
}

/// Reconstructs what a corpus cost from its judgments. Each writer's
/// generation questions for a verb form one generation task; each validator
/// of those questions is paid once for that task; each expansion validator
/// is paid once per verb for the expansion questions they judged.
pub fn corpus_cost(
    corpus: &[SentenceRecord],
    policy: &ValidityPolicy,
) -> Result<CostReport, AnnotationError> {
    let mut report = CostReport::default();
    for record in corpus {
        for entry in &record.verb_entries {
            report.verbs += 1;
            let mut tasks: BTreeMap<&str, Vec<usize>> = BTreeMap::new();
            let mut expansion: BTreeMap<&str, i64> = BTreeMap::new();
            for (qi, qa) in entry.qa_pairs.iter().enumerate() {
                if qa.is_valid_under(policy.rule_for(qa.source)) {
                    report.valid_questions += 1;
                }
                match qa.source {
                    QaSource::Generation => {
                        if let Some(writer) = qa.generator() {
                            tasks.entry(writer.worker_id.as_str()).or_default().push(qi);
                        }
                    }
                    QaSource::Expansion => {
                        for j in qa.validator_judgments() {
                            *expansion.entry(j.worker_id.as_str()).or_default() += 1;
                        }
                    }
                    QaSource::Parser => {}
                }
            }
            for questions in tasks.values() {
                let k = questions.len() as i64;
                report.add(
                    PaymentKind::Generation,
                    compute_payment(PaymentKind::Generation, k)?,
                );
                let mut validators: Vec<&str> = questions
                    .iter()
                    .flat_map(|&qi| {
                        entry.qa_pairs[qi]
                            .validator_judgments()
                            .iter()
                            .map(|j| j.worker_id.as_str())
                    })
                    .collect();
                validators.sort_unstable();
                validators.dedup();
                for _ in validators {
                    report.add(
                        PaymentKind::Validation,
                        compute_payment(PaymentKind::Validation, k)?,
                    );
                }
            }
            for &k in expansion.values() {
                report.add(
                    PaymentKind::ExpansionValidation,
                    compute_payment(PaymentKind::ExpansionValidation, k)?,
                );
            }
        }
    }
    Ok(report.finish())
}
