//! Small generated corpora with regular structure, for smoke tests and
//! overfitting checks.

use rand::seq::IndexedRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::corpus::{AnswerSpan, Domain, Judgment, QaPair, QaSource, SentenceRecord, VerbEntry};
use crate::grammar::{inflect, Grammar, Lexicon};
use crate::nn::{EncoderConfig, TrainConfig};
use crate::qgen::{grammar_slot_sizes, QgenConfig};
use crate::spandet::DetectorConfig;

const NOUNS: [&str; 12] = [
    "mayor", "council", "teacher", "student", "doctor", "nurse", "farmer", "banker", "chef",
    "pilot", "judge", "coach",
];
const VERBS: [&str; 8] = [
    "blame", "praise", "hire", "visit", "help", "thank", "call", "warn",
];
const PLACES: [&str; 5] = ["park", "city", "school", "hospital", "office"];
const TIMES: [&str; 3] = ["Yesterday", "Today", "Later"];

/// `n` sentences of three shapes: a transitive clause, the same with a
/// locative phrase, and the same after a fronted time adverb. Every verb has
/// unanimous subject and object questions plus a where/when question when
/// the shape has one.
pub fn toy_corpus(n: usize, seed: u64) -> Vec<SentenceRecord> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let grammar = Grammar::standard();
    let lexicon = Lexicon::builtin();
    (0..n)
        .map(|k| {
            let verb = inflect(VERBS.choose(&mut rng).unwrap(), &lexicon);
            let subj = *NOUNS.choose(&mut rng).unwrap();
            let obj = *NOUNS.choose(&mut rng).unwrap();
            let shape = rng.random_range(0..3);
            let mut tokens: Vec<String> = Vec::new();
            let mut tags: Vec<&str> = Vec::new();
            let mut push = |w: &str, t: &'static str, tokens: &mut Vec<String>| {
                tokens.push(w.to_string());
                tags.push(t);
            };
            let mut extra: Option<(String, AnswerSpan)> = None;
            if shape == 2 {
                push(TIMES.choose(&mut rng).unwrap(), "RB", &mut tokens);
                push(",", ",", &mut tokens);
                extra = Some((
                    format!("When did someone {} someone?", verb.stem),
                    AnswerSpan::new(0, 0),
                ));
            }
            let s0 = tokens.len();
            push(if s0 == 0 { "The" } else { "the" }, "DT", &mut tokens);
            push(subj, "NN", &mut tokens);
            let verb_index = tokens.len();
            push(&verb.past.clone(), "VBD", &mut tokens);
            push("the", "DT", &mut tokens);
            push(obj, "NN", &mut tokens);
            if shape == 1 {
                let p = tokens.len();
                push("in", "IN", &mut tokens);
                push("the", "DT", &mut tokens);
                push(PLACES.choose(&mut rng).unwrap(), "NN", &mut tokens);
                extra = Some((
                    format!("Where did someone {} someone?", verb.stem),
                    AnswerSpan::new(p + 1, p + 2),
                ));
            }
            push(".", ".", &mut tokens);

            let mut questions = vec![
                (
                    format!("Who {} someone?", verb.past),
                    AnswerSpan::new(s0, s0 + 1),
                ),
                (
                    format!("Who did someone {}?", verb.stem),
                    AnswerSpan::new(verb_index + 1, verb_index + 2),
                ),
            ];
            questions.extend(extra);
            let qa_pairs = questions
                .into_iter()
                .map(|(text, span)| QaPair {
                    slots: grammar
                        .parse_question(&text, &verb)
                        .expect("toy questions are grammatical"),
                    source: QaSource::Generation,
                    judgments: ["g1", "v1", "v2"]
                        .iter()
                        .map(|w| Judgment::valid(*w, vec![span]))
                        .collect(),
                })
                .collect();
            SentenceRecord {
                sentence_id: format!("toy-{k:04}"),
                domain: Domain::Other,
                tokens,
                pos_tags: tags.into_iter().map(String::from).collect(),
                verb_entries: vec![VerbEntry {
                    verb_index,
                    inflections: verb,
                    qa_pairs,
                }],
            }
        })
        .collect()
}

/// Small encoder for toy corpora.
pub fn toy_encoder_config(vocab_size: usize) -> EncoderConfig {
    EncoderConfig {
        vocab_size,
        word_dim: 16,
        predicate_dim: 4,
        hidden: 16,
        layers: 2,
        recurrent_dropout: 0.0,
    }
}

pub fn toy_detector_config(vocab_size: usize) -> DetectorConfig {
    DetectorConfig {
        encoder: toy_encoder_config(vocab_size),
        mlp_hidden: 16,
    }
}

pub fn toy_qgen_config(vocab_size: usize) -> QgenConfig {
    QgenConfig {
        encoder: toy_encoder_config(vocab_size),
        mlp_hidden: 16,
        decoder_hidden: 16,
        decoder_layers: 2,
        token_dim: 8,
        slot_sizes: grammar_slot_sizes(Grammar::standard()),
    }
}

/// Default training schedule with mini-batches of 5.
pub fn toy_train_config(seed: u64) -> TrainConfig {
    TrainConfig {
        batch_size: 5,
        seed,
        ..TrainConfig::default()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn records_validate_and_are_reproducible() {
        let a = toy_corpus(30, 4);
        for r in &a {
            r.validate().unwrap();
        }
        assert_eq!(a, toy_corpus(30, 4));
        assert!(a.iter().any(|r| r.tokens.len() == 9) && a.iter().any(|r| r.tokens[1] == ","));
    }
}
