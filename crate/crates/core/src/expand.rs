//! Data expansion: over-generate with a low-threshold parser, filter against
//! existing annotations, validate, and merge.

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::annotation::Stage;
use crate::corpus::{
    AnswerSpan, CorpusError, Judgment, QaPair, QaSource, SentenceRecord, ValidityPolicy, VerbEntry,
};
use crate::grammar::{Grammar, QuestionSlots};
use crate::parser::{cut, ParseError, Parser};

#[derive(Debug, thiserror::Error)]
pub enum ExpandError {
    #[error("corpus has {have} sentences, fewer than {k} folds")]
    TooFewSentences { have: usize, k: usize },
    #[error("fold count must be positive")]
    ZeroFolds,
    #[error(
        "candidate for {sentence_id} verb {verb_index} has {have} judgments, expected {expected}"
    )]
    JudgmentCount {
        sentence_id: String,
        verb_index: usize,
        have: usize,
        expected: usize,
    },
    #[error("no annotated verb {verb_index} in sentence {sentence_id}")]
    UnknownVerb {
        sentence_id: String,
        verb_index: usize,
    },
    #[error(transparent)]
    Parse(#[from] ParseError),
    #[error(transparent)]
    Corpus(#[from] CorpusError),
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct Provenance {
    pub model_id: String,
    pub fold: Option<usize>,
}

/// A generated question with the spans that produced it.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct CandidateQa {
    pub sentence_id: String,
    pub verb_index: usize,
    pub slots: QuestionSlots,
    pub spans: Vec<AnswerSpan>,
    pub span_probabilities: Vec<f64>,
    pub provenance: Provenance,
}

/// A candidate with its validators' judgments.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct JudgedCandidate {
    pub candidate: CandidateQa,
    pub judgments: Vec<Judgment>,
}

/// Parser output above `tau` for every annotated verb of `corpus`.
pub fn overgenerate(
    parser: &Parser,
    corpus: &[SentenceRecord],
    tau: f64,
    provenance: &Provenance,
) -> Result<Vec<CandidateQa>, ExpandError> {
    let mut out = Vec::new();
    for record in corpus {
        let verbs: Vec<usize> = record.verb_entries.iter().map(|e| e.verb_index).collect();
        let ranked = parser.rank_verbs(&record.tokens, &verbs, tau)?;
        for tuple in cut(&ranked, tau).tuples {
            let span_probabilities = tuple
                .spans
                .iter()
                .map(|s| {
                    ranked
                        .iter()
                        .find(|i| i.verb_index == tuple.verb_index && i.span == *s)
                        .map(|i| i.span_probability)
                        .unwrap_or(0.0)
                })
                .collect();
            out.push(CandidateQa {
                sentence_id: record.sentence_id.clone(),
                verb_index: tuple.verb_index,
                slots: tuple.slots,
                spans: tuple.spans,
                span_probabilities,
                provenance: provenance.clone(),
            });
        }
    }
    Ok(out)
}

fn find_entry<'a>(
    corpus: &'a [SentenceRecord],
    sentence_id: &str,
    verb_index: usize,
) -> Option<&'a VerbEntry> {
    corpus
        .iter()
        .find(|r| r.sentence_id == sentence_id)?
        .verb_entry(verb_index)
}

/// Drops candidates with a span sharing a token with an existing valid
/// answer of the same verb, or whose slots equal an existing question's.
pub fn filter_candidates(
    candidates: &[CandidateQa],
    corpus: &[SentenceRecord],
    policy: &ValidityPolicy,
) -> Vec<CandidateQa> {
    candidates
        .iter()
        .filter(|c| {
            let Some(entry) = find_entry(corpus, &c.sentence_id, c.verb_index) else {
                return true;
            };
            let answers: Vec<AnswerSpan> = entry
                .qa_pairs
                .iter()
                .filter(|qa| qa.is_valid_under(policy.rule_for(qa.source)))
                .flat_map(|qa| qa.all_spans())
                .collect();
            let overlaps = c
                .spans
                .iter()
                .any(|s| answers.iter().any(|a| a.overlaps(s)));
            let repeated = entry.qa_pairs.iter().any(|qa| qa.slots == c.slots);
            !overlaps && !repeated
        })
        .cloned()
        .collect()
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct Fold {
    pub index: usize,
    /// Sentence positions in the corpus.
    pub train: Vec<usize>,
    pub heldout: Vec<usize>,
}

/// Seeded sentence-level partition into `k` folds of near-equal size.
pub fn jackknife_folds(sentences: usize, k: usize, seed: u64) -> Result<Vec<Fold>, ExpandError> {
    if k == 0 {
        return Err(ExpandError::ZeroFolds);
    }
    if sentences < k {
        return Err(ExpandError::TooFewSentences { have: sentences, k });
    }
    let mut order: Vec<usize> = (0..sentences).collect();
    order.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
    Ok((0..k)
        .map(|i| {
            let mut heldout: Vec<usize> = order.iter().skip(i).step_by(k).copied().collect();
            heldout.sort_unstable();
            let train = (0..sentences)
                .filter(|s| heldout.binary_search(s).is_err())
                .collect();
            Fold {
                index: i,
                train,
                heldout,
            }
        })
        .collect())
}

#[derive(Debug, Clone, PartialEq)]
pub struct MergeResult {
    pub corpus: Vec<SentenceRecord>,
    /// Rejected candidates, as records holding only those questions.
    pub negatives: Vec<SentenceRecord>,
    pub merged: usize,
}

/// Appends candidates judged valid by all validators as expansion
/// questions; the rest go to the negatives. Each candidate needs exactly
/// as many judgments as the expansion stage has validators. The candidate's
/// spans become the model's (first) judgment.
pub fn merge_validated(
    corpus: &[SentenceRecord],
    validated: &[(CandidateQa, Vec<Judgment>)],
) -> Result<MergeResult, ExpandError> {
    let stage = Stage::Expansion;
    let mut out = corpus.to_vec();
    let mut negatives: Vec<SentenceRecord> = Vec::new();
    let mut merged = 0;
    for (c, judgments) in validated {
        if judgments.len() != stage.validators() {
            return Err(ExpandError::JudgmentCount {
                sentence_id: c.sentence_id.clone(),
                verb_index: c.verb_index,
                have: judgments.len(),
                expected: stage.validators(),
            });
        }
        let mut all = vec![Judgment::valid(
            c.provenance.model_id.clone(),
            c.spans.clone(),
        )];
        all.extend(judgments.iter().cloned());
        let qa = QaPair {
            slots: c.slots.clone(),
            source: QaSource::Expansion,
            judgments: all,
        };
        let unknown = || ExpandError::UnknownVerb {
            sentence_id: c.sentence_id.clone(),
            verb_index: c.verb_index,
        };
        let record = out
            .iter_mut()
            .find(|r| r.sentence_id == c.sentence_id)
            .ok_or_else(unknown)?;
        if qa.is_valid_under(stage.rule()) {
            record
                .verb_entry_mut(c.verb_index)
                .ok_or_else(unknown)?
                .qa_pairs
                .push(qa);
            merged += 1;
        } else {
            let template = record.verb_entry(c.verb_index).ok_or_else(unknown)?;
            let neg = match negatives
                .iter_mut()
                .find(|r| r.sentence_id == c.sentence_id)
            {
                Some(r) => r,
                None => {
                    negatives.push(SentenceRecord {
                        verb_entries: Vec::new(),
                        ..record.clone()
                    });
                    negatives.last_mut().expect("just pushed")
                }
            };
            match neg
                .verb_entries
                .iter_mut()
                .find(|e| e.verb_index == c.verb_index)
            {
                Some(e) => e.qa_pairs.push(qa),
                None => {
                    neg.verb_entries.push(VerbEntry {
                        verb_index: c.verb_index,
                        inflections: template.inflections.clone(),
                        qa_pairs: vec![qa],
                    });
                    neg.verb_entries.sort_by_key(|e| e.verb_index);
                }
            }
        }
    }
    let grammar = Grammar::standard();
    for r in &out {
        r.validate_with(grammar)?;
    }
    Ok(MergeResult {
        corpus: out,
        negatives,
        merged,
    })
}

/// True iff at least two of `spans` overlap answers of one original
/// question (`original` holds each question's spans).
pub fn is_paraphrase(spans: &[AnswerSpan], original: &[Vec<AnswerSpan>]) -> bool {
    original.iter().any(|q| {
        spans
            .iter()
            .filter(|s| q.iter().any(|a| a.overlaps(s)))
            .count()
            >= 2
    })
}

/// Removes expansion questions that paraphrase an original question.
pub fn paraphrase_filter(
    expanded: &[SentenceRecord],
    original: &[SentenceRecord],
) -> Vec<SentenceRecord> {
    expanded
        .iter()
        .map(|r| {
            let mut r = r.clone();
            for entry in &mut r.verb_entries {
                let Some(orig) = find_entry(original, &r.sentence_id, entry.verb_index) else {
                    continue;
                };
                let orig_spans: Vec<Vec<AnswerSpan>> = orig
                    .qa_pairs
                    .iter()
                    .filter(|qa| qa.source != QaSource::Expansion)
                    .map(QaPair::all_spans)
                    .collect();
                entry.qa_pairs.retain(|qa| {
                    qa.source != QaSource::Expansion || !is_paraphrase(&qa.all_spans(), &orig_spans)
                });
            }
            r
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn s(a: usize, b: usize) -> AnswerSpan {
        AnswerSpan::new(a, b)
    }

    #[test]
    fn paraphrase_rule_instantiations() {
        let q = vec![s(0, 1), s(5, 6)];
        let other = vec![s(8, 9)];
        assert!(is_paraphrase(
            &[s(1, 1), s(6, 7)],
            &[q.clone(), other.clone()]
        ));
        assert!(!is_paraphrase(
            &[s(1, 1), s(9, 9)],
            &[q.clone(), other.clone()]
        ));
        assert!(!is_paraphrase(&[s(1, 1)], &[q]));
    }

    #[test]
    fn folds_partition_the_corpus() {
        let folds = jackknife_folds(10, 5, 3).unwrap();
        let mut seen = vec![0; 10];
        for f in &folds {
            assert_eq!(f.heldout.len(), 2);
            assert_eq!(f.train.len(), 8);
            for &h in &f.heldout {
                seen[h] += 1;
                assert!(!f.train.contains(&h));
            }
        }
        assert!(seen.iter().all(|&c| c == 1));
        assert_eq!(folds, jackknife_folds(10, 5, 3).unwrap());
        assert!(matches!(
            jackknife_folds(4, 5, 0),
            Err(ExpandError::TooFewSentences { .. })
        ));
    }
}
