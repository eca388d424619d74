use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use super::{Domain, QaSource, SentenceRecord};
use crate::annotation::{Stage, ValidityRule};

/// Which aggregation rule decides validity for each question source.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct ValidityPolicy {
    pub generation: ValidityRule,
    pub expansion: ValidityRule,
    pub parser: ValidityRule,
}

impl Default for ValidityPolicy {
    fn default() -> Self {
        ValidityPolicy {
            generation: Stage::Original.rule(),
            expansion: Stage::Expansion.rule(),
            parser: Stage::HumanEval.rule(),
        }
    }
}

impl ValidityPolicy {
    pub fn rule_for(&self, source: QaSource) -> ValidityRule {
        match source {
            QaSource::Generation => self.generation,
            QaSource::Expansion => self.expansion,
            QaSource::Parser => self.parser,
        }
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct Counts {
    pub sentences: usize,
    pub verbs: usize,
    pub questions: usize,
    pub valid_questions: usize,
    pub questions_per_verb: f64,
    pub questions_per_sentence: f64,
    pub valid_per_verb: f64,
    pub valid_per_sentence: f64,
}

fn ratio(a: usize, b: usize) -> f64 {
    if b == 0 {
        0.0
    } else {
        a as f64 / b as f64
    }
}

impl Counts {
    fn add(&mut self, other: &Counts) {
        self.sentences += other.sentences;
        self.verbs += other.verbs;
        self.questions += other.questions;
        self.valid_questions += other.valid_questions;
    }

    fn finish(mut self) -> Self {
        self.questions_per_verb = ratio(self.questions, self.verbs);
        self.questions_per_sentence = ratio(self.questions, self.sentences);
        self.valid_per_verb = ratio(self.valid_questions, self.verbs);
        self.valid_per_sentence = ratio(self.valid_questions, self.sentences);
        self
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct CorpusStats {
    pub total: Counts,
    pub by_domain: BTreeMap<Domain, Counts>,
}

/// Counts per domain and overall. Questions lacking enough validator
/// judgments for their rule count as not valid.
pub fn corpus_stats(corpus: &[SentenceRecord], policy: &ValidityPolicy) -> CorpusStats {
    let mut by_domain: BTreeMap<Domain, Counts> = BTreeMap::new();
    for record in corpus {
        let counts = by_domain.entry(record.domain).or_default();
        counts.sentences += 1;
        counts.verbs += record.verb_entries.len();
        for qa in record.verb_entries.iter().flat_map(|v| &v.qa_pairs) {
            counts.questions += 1;
            counts.valid_questions += qa.is_valid_under(policy.rule_for(qa.source)) as usize;
        }
    }
    let mut total = Counts::default();
    for counts in by_domain.values_mut() {
        total.add(counts);
        *counts = counts.finish();
    }
    CorpusStats {
        total: total.finish(),
        by_domain,
    }
}
