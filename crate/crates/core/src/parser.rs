//! The full pipeline: identify verbs, detect answer spans, generate one
//! question per span, group spans by question and drop ungrammatical ones.

use std::io::{BufRead, Write};

use serde::{Deserialize, Serialize};

use crate::corpus::{identify_verbs, AnswerSpan, CorpusError};
use crate::grammar::{Grammar, QuestionSlots};
use crate::qgen::{QgenError, QuestionGenerator};
use crate::spandet::{SpanDetError, SpanDetector};

#[derive(Debug, thiserror::Error)]
pub enum ParseError {
    #[error(transparent)]
    Corpus(#[from] CorpusError),
    #[error(transparent)]
    Spans(#[from] SpanDetError),
    #[error(transparent)]
    Questions(#[from] QgenError),
    #[error("threshold {0} outside [0, 1]")]
    Threshold(f64),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error("line {line}: {source}")]
    Json {
        line: usize,
        source: serde_json::Error,
    },
}

/// One (span, question) decision, before grouping.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct RankedItem {
    pub verb_index: usize,
    pub span: AnswerSpan,
    pub span_probability: f64,
    pub slots: QuestionSlots,
    pub generation_probability: f64,
    /// Whether the question is accepted by the grammar.
    pub grammatical: bool,
}

/// A question with every span that produced it.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct ParseTuple {
    pub verb_index: usize,
    pub slots: QuestionSlots,
    pub spans: Vec<AnswerSpan>,
    /// Minimum generation probability over the grouped spans.
    pub probability: f64,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct ParseOutput {
    pub tuples: Vec<ParseTuple>,
    /// Items whose question the grammar rejected.
    pub dropped: Vec<RankedItem>,
}

impl ParseOutput {
    /// `(question, span)` pairs of the kept tuples.
    pub fn items(&self) -> Vec<(QuestionSlots, AnswerSpan)> {
        self.tuples
            .iter()
            .flat_map(|t| t.spans.iter().map(move |&s| (t.slots.clone(), s)))
            .collect()
    }
}

fn check_tau(tau: f64) -> Result<(), ParseError> {
    if (0.0..=1.0).contains(&tau) {
        Ok(())
    } else {
        Err(ParseError::Threshold(tau))
    }
}

/// Ranked items above `tau` (strictly), grouped by verb and exact slot tuple
/// in order of first appearance.
pub fn cut(ranked: &[RankedItem], tau: f64) -> ParseOutput {
    let mut out = ParseOutput::default();
    for item in ranked.iter().filter(|i| i.span_probability > tau) {
        if !item.grammatical {
            out.dropped.push(item.clone());
            continue;
        }
        match out
            .tuples
            .iter_mut()
            .find(|t| t.verb_index == item.verb_index && t.slots == item.slots)
        {
            Some(t) => {
                if !t.spans.contains(&item.span) {
                    t.spans.push(item.span);
                }
                t.probability = t.probability.min(item.generation_probability);
            }
            None => out.tuples.push(ParseTuple {
                verb_index: item.verb_index,
                slots: item.slots.clone(),
                spans: vec![item.span],
                probability: item.generation_probability,
            }),
        }
    }
    out
}

/// Number of distinct grammatical questions per verb over sentences, each
/// given by its own ranking, when every ranking is cut at `tau`.
pub fn questions_per_verb(sentences: &[Vec<RankedItem>], verbs: usize, tau: f64) -> f64 {
    if verbs == 0 {
        return 0.0;
    }
    let questions: usize = sentences
        .iter()
        .map(|ranked| cut(ranked, tau).tuples.len())
        .sum();
    questions as f64 / verbs as f64
}

/// The largest threshold, among 0 and the item probabilities, whose cut
/// yields at least `target` questions per verb.
pub fn cutoff_for_questions_per_verb(
    sentences: &[Vec<RankedItem>],
    verbs: usize,
    target: f64,
) -> Option<f64> {
    let mut candidates: Vec<f64> = sentences
        .iter()
        .flatten()
        .map(|i| i.span_probability)
        .collect();
    candidates.push(0.0);
    candidates.sort_by(|a, b| b.total_cmp(a));
    candidates.dedup();
    candidates
        .into_iter()
        .find(|&tau| questions_per_verb(sentences, verbs, tau) >= target)
}

pub struct Parser<'m> {
    pub detector: &'m SpanDetector,
    pub generator: &'m QuestionGenerator,
    pub grammar: &'m Grammar,
}

impl<'m> Parser<'m> {
    pub fn new(detector: &'m SpanDetector, generator: &'m QuestionGenerator) -> Self {
        Parser {
            detector,
            generator,
            grammar: Grammar::standard(),
        }
    }

    /// Items for one verb with span probability above `tau_low`, ordered by
    /// descending span probability (ties by span position).
    pub fn rank_verb(
        &self,
        tokens: &[String],
        verb_index: usize,
        tau_low: f64,
    ) -> Result<Vec<RankedItem>, ParseError> {
        check_tau(tau_low)?;
        let mut scored: Vec<_> = self
            .detector
            .score(tokens, verb_index)?
            .into_iter()
            .filter(|s| s.probability > tau_low)
            .collect();
        scored.sort_by(|a, b| {
            b.probability
                .total_cmp(&a.probability)
                .then(a.span.cmp(&b.span))
        });
        let spans: Vec<AnswerSpan> = scored.iter().map(|s| s.span).collect();
        let generated = self.generator.generate(tokens, verb_index, &spans)?;
        Ok(scored
            .into_iter()
            .zip(generated)
            .map(|(s, g)| RankedItem {
                verb_index,
                span: s.span,
                span_probability: s.probability,
                grammatical: self.grammar.is_valid(&g.slots),
                slots: g.slots,
                generation_probability: g.probability,
            })
            .collect())
    }

    /// Ranked items across the given verbs, merged by descending span
    /// probability.
    pub fn rank_verbs(
        &self,
        tokens: &[String],
        verbs: &[usize],
        tau_low: f64,
    ) -> Result<Vec<RankedItem>, ParseError> {
        let mut all = Vec::new();
        for &v in verbs {
            all.extend(self.rank_verb(tokens, v, tau_low)?);
        }
        all.sort_by(|a, b| {
            b.span_probability
                .total_cmp(&a.span_probability)
                .then(a.verb_index.cmp(&b.verb_index))
                .then(a.span.cmp(&b.span))
        });
        Ok(all)
    }

    pub fn parse_ranked(
        &self,
        tokens: &[String],
        pos_tags: &[String],
        tau_low: f64,
    ) -> Result<Vec<RankedItem>, ParseError> {
        let verbs = identify_verbs(tokens, pos_tags)?;
        self.rank_verbs(tokens, &verbs, tau_low)
    }

    pub fn parse(
        &self,
        tokens: &[String],
        pos_tags: &[String],
        tau: f64,
    ) -> Result<ParseOutput, ParseError> {
        Ok(cut(&self.parse_ranked(tokens, pos_tags, tau)?, tau))
    }

    /// Parse with the verbs given rather than identified.
    pub fn parse_verbs(
        &self,
        tokens: &[String],
        verbs: &[usize],
        tau: f64,
    ) -> Result<ParseOutput, ParseError> {
        Ok(cut(&self.rank_verbs(tokens, verbs, tau)?, tau))
    }
}

/// One line of the prediction file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct Prediction {
    pub sentence_id: String,
    pub verb_index: usize,
    pub slots: QuestionSlots,
    pub spans: Vec<AnswerSpan>,
    pub prob: f64,
}

impl Prediction {
    pub fn from_tuple(sentence_id: &str, t: &ParseTuple) -> Self {
        Prediction {
            sentence_id: sentence_id.to_string(),
            verb_index: t.verb_index,
            slots: t.slots.clone(),
            spans: t.spans.clone(),
            prob: t.probability,
        }
    }
}

pub fn write_predictions(
    mut writer: impl Write,
    predictions: &[Prediction],
) -> Result<(), ParseError> {
    for p in predictions {
        serde_json::to_writer(&mut writer, p)
            .map_err(|e| ParseError::Json { line: 0, source: e })?;
        writer.write_all(b"\n")?;
    }
    writer.flush()?;
    Ok(())
}

pub fn read_predictions(reader: impl BufRead) -> Result<Vec<Prediction>, ParseError> {
    let mut out = Vec::new();
    for (n, line) in reader.lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        out.push(serde_json::from_str(&line).map_err(|e| ParseError::Json {
            line: n + 1,
            source: e,
        })?);
    }
    Ok(out)
}
