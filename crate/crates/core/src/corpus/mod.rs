//! Annotated sentences: domain types, JSONL persistence, verb identification
//! and dataset statistics.

mod fallback;
mod io;
mod stats;
mod verbs;

use std::collections::HashMap;
use std::fmt;

use serde::de::{self, Deserializer, SeqAccess, Visitor};
use serde::ser::{SerializeTuple, Serializer};
use serde::{Deserialize, Serialize};

use crate::annotation::ValidityRule;
use crate::grammar::{Grammar, InflectionTable, QuestionSlots};

pub use fallback::{fallback_tag, fallback_tokenize};
pub use io::{load_corpus, read_corpus, save_corpus, write_corpus};
pub use stats::{corpus_stats, CorpusStats, Counts, ValidityPolicy};
pub use verbs::identify_verbs;

#[derive(Debug, thiserror::Error)]
pub enum CorpusError {
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error("line {line}: {source}")]
    Parse {
        line: usize,
        source: serde_json::Error,
    },
    #[error("sentence {sentence_id}: {message}")]
    Invariant {
        sentence_id: String,
        message: String,
    },
    #[error("{tokens} tokens but {tags} POS tags")]
    LengthMismatch { tokens: usize, tags: usize },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Domain {
    Wikipedia,
    Wikinews,
    Science,
    Other,
}

impl Domain {
    pub const ALL: [Domain; 4] = [
        Domain::Wikipedia,
        Domain::Wikinews,
        Domain::Science,
        Domain::Other,
    ];
}

/// Inclusive token range `start..=end`. Serialized as `[start, end]`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct AnswerSpan {
    pub start: usize,
    pub end: usize,
}

impl AnswerSpan {
    /// Panics if `end < start`.
    pub fn new(start: usize, end: usize) -> Self {
        assert!(start <= end, "span ({start}, {end}) ends before it starts");
        AnswerSpan { start, end }
    }

    /// Number of tokens covered.
    pub fn width(&self) -> usize {
        self.end.saturating_sub(self.start) + 1
    }

    pub fn contains(&self, index: usize) -> bool {
        self.start <= index && index <= self.end
    }

    /// Whether the spans share at least one token.
    pub fn overlaps(&self, other: &AnswerSpan) -> bool {
        self.start <= other.end && other.start <= self.end
    }

    pub fn intersection_len(&self, other: &AnswerSpan) -> usize {
        let lo = self.start.max(other.start);
        let hi = self.end.min(other.end);
        if lo <= hi {
            hi - lo + 1
        } else {
            0
        }
    }

    pub fn union_len(&self, other: &AnswerSpan) -> usize {
        self.width() + other.width() - self.intersection_len(other)
    }
}

impl fmt::Display for AnswerSpan {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "({}, {})", self.start, self.end)
    }
}

impl Serialize for AnswerSpan {
    fn serialize<S: Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        let mut t = serializer.serialize_tuple(2)?;
        t.serialize_element(&self.start)?;
        t.serialize_element(&self.end)?;
        t.end()
    }
}

// Reversed spans deserialize fine and are reported by `SentenceRecord::validate`
// with the sentence id attached.
impl<'de> Deserialize<'de> for AnswerSpan {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        struct PairVisitor;
        impl<'de> Visitor<'de> for PairVisitor {
            type Value = AnswerSpan;
            fn expecting(&self, f: &mut fmt::Formatter) -> fmt::Result {
                f.write_str("a [start, end] pair of token indices")
            }
            fn visit_seq<A: SeqAccess<'de>>(self, mut seq: A) -> Result<AnswerSpan, A::Error> {
                let start = seq
                    .next_element()?
                    .ok_or_else(|| de::Error::invalid_length(0, &self))?;
                let end = seq
                    .next_element()?
                    .ok_or_else(|| de::Error::invalid_length(1, &self))?;
                if seq.next_element::<de::IgnoredAny>()?.is_some() {
                    return Err(de::Error::invalid_length(3, &self));
                }
                Ok(AnswerSpan { start, end })
            }
        }
        deserializer.deserialize_tuple(2, PairVisitor)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum QaSource {
    Generation,
    Expansion,
    Parser,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct Judgment {
    pub worker_id: String,
    pub is_valid: bool,
    pub spans: Vec<AnswerSpan>,
}

impl Judgment {
    pub fn valid(worker_id: impl Into<String>, spans: Vec<AnswerSpan>) -> Self {
        Judgment {
            worker_id: worker_id.into(),
            is_valid: true,
            spans,
        }
    }

    pub fn invalid(worker_id: impl Into<String>) -> Self {
        Judgment {
            worker_id: worker_id.into(),
            is_valid: false,
            spans: Vec::new(),
        }
    }
}

/// A question with its judgments. The first judgment belongs to whoever
/// wrote the question (a worker, or a model for expansion and parser
/// output); the rest come from validators.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct QaPair {
    pub slots: QuestionSlots,
    pub source: QaSource,
    pub judgments: Vec<Judgment>,
}

impl QaPair {
    pub fn generator(&self) -> Option<&Judgment> {
        self.judgments.first()
    }

    pub fn validator_judgments(&self) -> &[Judgment] {
        self.judgments.get(1..).unwrap_or(&[])
    }

    /// Validity under `rule`, judged by validators only; too few judgments
    /// count as not valid.
    pub fn is_valid_under(&self, rule: ValidityRule) -> bool {
        let verdicts: Vec<bool> = self
            .validator_judgments()
            .iter()
            .map(|j| j.is_valid)
            .collect();
        crate::annotation::aggregate_validity(&verdicts, rule).unwrap_or(false)
    }

    /// Every span any annotator gave for this question, deduplicated.
    pub fn all_spans(&self) -> Vec<AnswerSpan> {
        let mut spans: Vec<AnswerSpan> = self
            .judgments
            .iter()
            .flat_map(|j| j.spans.iter().copied())
            .collect();
        spans.sort();
        spans.dedup();
        spans
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct VerbEntry {
    pub verb_index: usize,
    pub inflections: InflectionTable,
    pub qa_pairs: Vec<QaPair>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct SentenceRecord {
    pub sentence_id: String,
    pub domain: Domain,
    pub tokens: Vec<String>,
    pub pos_tags: Vec<String>,
    pub verb_entries: Vec<VerbEntry>,
}

impl SentenceRecord {
    pub fn verb_entry(&self, verb_index: usize) -> Option<&VerbEntry> {
        self.verb_entries
            .iter()
            .find(|v| v.verb_index == verb_index)
    }

    pub fn verb_entry_mut(&mut self, verb_index: usize) -> Option<&mut VerbEntry> {
        self.verb_entries
            .iter_mut()
            .find(|v| v.verb_index == verb_index)
    }

    /// Checks every record invariant against the standard grammar.
    pub fn validate(&self) -> Result<(), CorpusError> {
        self.validate_with(Grammar::standard())
    }

    pub fn validate_with(&self, grammar: &Grammar) -> Result<(), CorpusError> {
        let fail = |message: String| {
            Err(CorpusError::Invariant {
                sentence_id: self.sentence_id.clone(),
                message,
            })
        };
        let n = self.tokens.len();
        if n == 0 {
            return fail("no tokens".into());
        }
        if self.pos_tags.len() != n {
            return fail(format!("{n} tokens but {} POS tags", self.pos_tags.len()));
        }
        let mut previous: Option<usize> = None;
        for entry in &self.verb_entries {
            let v = entry.verb_index;
            if v >= n {
                return fail(format!("verb index {v} out of range"));
            }
            if previous.is_some_and(|p| p >= v) {
                return fail(format!("verb index {v} not strictly increasing"));
            }
            previous = Some(v);
            if !self.pos_tags[v].starts_with("VB") {
                return fail(format!("verb index {v} has tag {}", self.pos_tags[v]));
            }
            if !entry.inflections.is_complete() {
                return fail(format!("verb {v}: incomplete inflection table"));
            }
            self.validate_verb(entry, grammar).or_else(fail)?;
        }
        Ok(())
    }

    fn validate_verb(&self, entry: &VerbEntry, grammar: &Grammar) -> Result<(), String> {
        let v = entry.verb_index;
        let n = self.tokens.len();
        // (worker, question) -> spans, for the per-annotator overlap check
        let mut by_worker: HashMap<&str, Vec<(usize, AnswerSpan)>> = HashMap::new();
        for (qi, qa) in entry.qa_pairs.iter().enumerate() {
            let here = format!("verb {v} question {qi}");
            match grammar.accepts(&qa.slots) {
                Ok(true) => {}
                Ok(false) => return Err(format!("{here}: not accepted by the question grammar")),
                Err(e) => return Err(format!("{here}: {e}")),
            }
            let Some(first) = qa.generator() else {
                return Err(format!("{here}: no judgments"));
            };
            if !first.is_valid || first.spans.is_empty() {
                return Err(format!(
                    "{here}: first judgment must be the writer's, valid with spans"
                ));
            }
            for (ji, j) in qa.judgments.iter().enumerate() {
                if j.is_valid == j.spans.is_empty() {
                    return Err(format!("{here}: judgment {ji} must have spans iff valid"));
                }
                for s in &j.spans {
                    if s.end < s.start {
                        return Err(format!("{here}: span {s} ends before it starts"));
                    }
                    if s.end >= n {
                        return Err(format!("{here}: span {s} exceeds {n} tokens"));
                    }
                }
                // model-written questions are not held to the annotator constraint
                if ji == 0 && qa.source != QaSource::Generation {
                    continue;
                }
                by_worker
                    .entry(j.worker_id.as_str())
                    .or_default()
                    .extend(j.spans.iter().map(|&s| (qi, s)));
            }
        }
        for (worker, spans) in &by_worker {
            for (a, (qa, sa)) in spans.iter().enumerate() {
                for (qb, sb) in &spans[a + 1..] {
                    if qa != qb && sa.overlaps(sb) {
                        return Err(format!(
                            "verb {v}: worker {worker} gave overlapping spans {sa} and {sb} to questions {qa} and {qb}"
                        ));
                    }
                }
            }
        }
        Ok(())
    }
}
