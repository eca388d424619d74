//! Per-verb training and evaluation instances drawn from a corpus.

use serde::{Deserialize, Serialize};

use crate::corpus::{AnswerSpan, SentenceRecord, ValidityPolicy};
use crate::metrics::{gold_questions, GoldQuestion};

/// One annotated verb: its sentence, position and valid gold questions.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct VerbInstance {
    pub sentence_id: String,
    pub tokens: Vec<String>,
    pub verb_index: usize,
    pub gold: Vec<GoldQuestion>,
}

impl VerbInstance {
    /// Union of all gold answer spans, sorted.
    pub fn answer_spans(&self) -> Vec<AnswerSpan> {
        let mut spans: Vec<AnswerSpan> = self
            .gold
            .iter()
            .flat_map(|q| q.spans.iter().copied())
            .collect();
        spans.sort();
        spans.dedup();
        spans
    }
}

pub fn verb_instances(corpus: &[SentenceRecord], policy: &ValidityPolicy) -> Vec<VerbInstance> {
    corpus
        .iter()
        .flat_map(|s| {
            s.verb_entries.iter().map(move |e| VerbInstance {
                sentence_id: s.sentence_id.clone(),
                tokens: s.tokens.clone(),
                verb_index: e.verb_index,
                gold: gold_questions(e, policy),
            })
        })
        .collect()
}
