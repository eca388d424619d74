//! Finite-difference gradient checks of every trainable head on random
//! micro-instances, in f64.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::corpus::AnswerSpan;
use crate::grammar::Grammar;
use crate::nn::{
    gradient_check, Encoder, EncoderConfig, GradCheckConfig, GradCheckReport, NnError, ParamStore,
};
use crate::qgen::{grammar_slot_sizes, LocalNet, QgenConfig, SeqNet};
use crate::spandet::{spans_to_tags, tags_to_spans, BioNet, DetectorConfig, SpanNet, Tag};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub enum Head {
    Bio,
    SpanScorer,
    LocalQgen,
    SeqQgen,
    Encoder,
}

impl Head {
    pub const ALL: [Head; 5] = [
        Head::Bio,
        Head::SpanScorer,
        Head::LocalQgen,
        Head::SeqQgen,
        Head::Encoder,
    ];
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct HeadCheck {
    pub head: Head,
    pub instances: usize,
    /// Coordinates compared over all instances.
    pub checked: usize,
    /// Sampled coordinates skipped at ReLU kinks.
    pub kinks: usize,
    pub max_relative_error: f64,
    /// Instance and coordinate of the largest error.
    pub worst: Option<String>,
    pub passed: bool,
}

const VOCAB: usize = 7;

fn micro_encoder() -> EncoderConfig {
    EncoderConfig {
        vocab_size: VOCAB,
        word_dim: 3,
        predicate_dim: 2,
        hidden: 3,
        layers: 2,
        recurrent_dropout: 0.0,
    }
}

struct Instance {
    tokens: Vec<usize>,
    verb: usize,
    spans: Vec<AnswerSpan>,
    question: [usize; 7],
}

fn instance(rng: &mut ChaCha8Rng, slot_sizes: &[usize; 7]) -> Instance {
    let n = rng.random_range(3..=6);
    let tokens = (0..n).map(|_| rng.random_range(0..VOCAB)).collect();
    let verb = rng.random_range(0..n);
    let tags: Vec<Tag> = (0..n).map(|_| Tag::ALL[rng.random_range(0..3)]).collect();
    let mut spans = tags_to_spans(&tags);
    if spans.is_empty() {
        spans.push(AnswerSpan::new(0, 0));
    }
    let question = slot_sizes.map(|s| rng.random_range(0..s));
    Instance {
        tokens,
        verb,
        spans,
        question,
    }
}

/// Runs `instances` gradient checks of `head`, each on fresh parameters.
pub fn check_head(head: Head, instances: usize, seed: u64) -> Result<HeadCheck, NnError> {
    let detector = DetectorConfig {
        encoder: micro_encoder(),
        mlp_hidden: 4,
    };
    let qgen = QgenConfig {
        encoder: micro_encoder(),
        mlp_hidden: 4,
        decoder_hidden: 3,
        decoder_layers: 2,
        token_dim: 2,
        slot_sizes: grammar_slot_sizes(Grammar::standard()),
    };
    let mut out = HeadCheck {
        head,
        instances,
        checked: 0,
        kinks: 0,
        max_relative_error: 0.0,
        worst: None,
        passed: true,
    };
    for i in 0..instances {
        let s = seed.wrapping_mul(1_000_003).wrapping_add(i as u64);
        let mut rng = ChaCha8Rng::seed_from_u64(s);
        let inst = instance(&mut rng, &qgen.slot_sizes);
        let span = inst.spans[rng.random_range(0..inst.spans.len())];
        let cfg = GradCheckConfig {
            seed: s,
            samples_per_param: 2,
            ..GradCheckConfig::default()
        };
        let mut store = ParamStore::<f64>::new();
        let report: GradCheckReport = match head {
            Head::Bio => {
                let net = BioNet::build(&mut store, &detector, &mut rng)?;
                let tags = spans_to_tags(&inst.spans, inst.tokens.len()).expect("spans from tags");
                gradient_check(
                    &store,
                    |g| net.loss(g, &inst.tokens, inst.verb, &tags, None),
                    &cfg,
                )?
            }
            Head::SpanScorer => {
                let net = SpanNet::build(&mut store, &detector, &mut rng)?;
                gradient_check(
                    &store,
                    |g| net.loss(g, &inst.tokens, inst.verb, &inst.spans, None),
                    &cfg,
                )?
            }
            Head::LocalQgen => {
                let net = LocalNet::build(&mut store, &qgen, &mut rng)?;
                gradient_check(
                    &store,
                    |g| net.loss(g, &inst.tokens, inst.verb, span, &inst.question, None),
                    &cfg,
                )?
            }
            Head::SeqQgen => {
                let net = SeqNet::build(&mut store, &qgen, &mut rng)?;
                gradient_check(
                    &store,
                    |g| net.loss(g, &inst.tokens, inst.verb, span, &inst.question, None),
                    &cfg,
                )?
            }
            Head::Encoder => {
                let enc = Encoder::build(&mut store, "enc", micro_encoder(), &mut rng)?;
                gradient_check(
                    &store,
                    |g| {
                        let states = enc.forward(g, &inst.tokens, inst.verb, None)?;
                        let cat = g.concat(&states);
                        let sq = g.mul(cat, cat);
                        Ok(g.total(sq))
                    },
                    &GradCheckConfig {
                        samples_per_param: 4,
                        ..cfg
                    },
                )?
            }
        };
        out.checked += report.checked;
        out.kinks += report.kinks;
        if out.worst.is_none() || report.max_relative_error > out.max_relative_error {
            out.max_relative_error = report.max_relative_error;
            out.worst = report.worst.map(|w| format!("instance {i}: {w}"));
        }
        out.passed &= report.passed;
    }
    Ok(out)
}

/// Every head, `instances` checks each.
pub fn check_all_heads(instances: usize, seed: u64) -> Result<Vec<HeadCheck>, NnError> {
    Head::ALL
        .iter()
        .map(|&h| check_head(h, instances, seed))
        .collect()
}
