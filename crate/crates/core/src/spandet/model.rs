use std::path::Path;

use rand::{Rng, RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::{
    select_spans, spans_to_tags, tags_to_spans, viterbi_decode, ScoredSpan, SpanDetError, Tag,
};
use crate::corpus::AnswerSpan;
use crate::dataset::VerbInstance;
use crate::metrics::{span_detection_counts, Matcher, Prf, PrfCounts};
use crate::nn::{
    init_glorot, load_checkpoint, save_checkpoint, train_loop, Encoder, EncoderConfig, Graph, Mlp,
    MlpConfig, NnError, NodeId, ParamId, ParamStore, Real, Tensor, TrainConfig, TrainReport, Vocab,
};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub enum DetectorKind {
    Bio,
    Span,
}

impl DetectorKind {
    pub fn checkpoint_kind(self) -> &'static str {
        match self {
            DetectorKind::Bio => "spanBio",
            DetectorKind::Span => "spanScorer",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct DetectorConfig {
    pub encoder: EncoderConfig,
    pub mlp_hidden: usize,
}

impl DetectorConfig {
    pub fn full_size(vocab_size: usize) -> Self {
        DetectorConfig {
            encoder: EncoderConfig::new(vocab_size),
            mlp_hidden: 100,
        }
    }
}

/// Encoder plus a per-token three-way tag classifier.
#[derive(Debug, Clone, PartialEq)]
pub struct BioNet {
    pub encoder: Encoder,
    pub head: Mlp,
}

impl BioNet {
    fn head_config(config: &DetectorConfig) -> MlpConfig {
        MlpConfig {
            input: config.encoder.hidden,
            hidden: config.mlp_hidden,
            output: 3,
        }
    }

    pub fn build<T: Real>(
        store: &mut ParamStore<T>,
        config: &DetectorConfig,
        rng: &mut impl Rng,
    ) -> Result<Self, NnError> {
        Ok(BioNet {
            encoder: Encoder::build(store, "enc", config.encoder, rng)?,
            head: Mlp::build(store, "bio", Self::head_config(config), rng)?,
        })
    }

    pub fn bind<T: Real>(store: &ParamStore<T>, config: &DetectorConfig) -> Result<Self, NnError> {
        Ok(BioNet {
            encoder: Encoder::bind(store, "enc", config.encoder)?,
            head: Mlp::bind(store, "bio", Self::head_config(config))?,
        })
    }

    pub fn logits<T: Real>(
        &self,
        g: &mut Graph<T>,
        tokens: &[usize],
        verb_index: usize,
        dropout: Option<&mut dyn RngCore>,
    ) -> Result<Vec<NodeId>, NnError> {
        let states = self.encoder.forward(g, tokens, verb_index, dropout)?;
        states
            .into_iter()
            .map(|h| self.head.forward(g, h))
            .collect()
    }

    /// Summed per-token cross entropy against `tags`.
    pub fn loss<T: Real>(
        &self,
        g: &mut Graph<T>,
        tokens: &[usize],
        verb_index: usize,
        tags: &[Tag],
        dropout: Option<&mut dyn RngCore>,
    ) -> Result<NodeId, NnError> {
        let logits = self.logits(g, tokens, verb_index, dropout)?;
        let terms: Vec<NodeId> = logits
            .iter()
            .zip(tags)
            .map(|(&l, t)| g.softmax_xent(l, t.index()))
            .collect();
        Ok(g.sum(&terms))
    }
}

/// Scores span `(i, j)` as `w2 · relu(W_s h_i + W_e h_j + b1) + b2`, which
/// is a one-hidden-layer network over `[h_i; h_j]` with its first layer
/// split by endpoint.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SpanScorer {
    pub start: ParamId,
    pub end: ParamId,
    pub b1: ParamId,
    pub w2: ParamId,
    pub b2: ParamId,
}

impl SpanScorer {
    pub fn build<T: Real>(
        store: &mut ParamStore<T>,
        prefix: &str,
        input: usize,
        hidden: usize,
        rng: &mut impl Rng,
    ) -> Result<Self, NnError> {
        Ok(SpanScorer {
            start: store.add(format!("{prefix}.ws"), init_glorot(hidden, input, rng))?,
            end: store.add(format!("{prefix}.we"), init_glorot(hidden, input, rng))?,
            b1: store.add(format!("{prefix}.b1"), Tensor::zeros(&[hidden]))?,
            w2: store.add(format!("{prefix}.w2"), init_glorot(1, hidden, rng))?,
            b2: store.add(format!("{prefix}.b2"), Tensor::zeros(&[1]))?,
        })
    }

    pub fn bind<T: Real>(
        store: &ParamStore<T>,
        prefix: &str,
        input: usize,
        hidden: usize,
    ) -> Result<Self, NnError> {
        Ok(SpanScorer {
            start: store.expect(&format!("{prefix}.ws"), &[hidden, input])?,
            end: store.expect(&format!("{prefix}.we"), &[hidden, input])?,
            b1: store.expect(&format!("{prefix}.b1"), &[hidden])?,
            w2: store.expect(&format!("{prefix}.w2"), &[1, hidden])?,
            b2: store.expect(&format!("{prefix}.b2"), &[1])?,
        })
    }

    /// One logit per span `i ≤ j`, ordered by start then end.
    pub fn logits<T: Real>(
        &self,
        g: &mut Graph<T>,
        states: &[NodeId],
    ) -> Vec<(AnswerSpan, NodeId)> {
        let starts: Vec<NodeId> = states
            .iter()
            .map(|&h| g.affine(self.start, h, Some(self.b1)))
            .collect();
        let ends: Vec<NodeId> = states
            .iter()
            .map(|&h| g.affine(self.end, h, None))
            .collect();
        let mut out = Vec::with_capacity(states.len() * (states.len() + 1) / 2);
        for i in 0..states.len() {
            for j in i..states.len() {
                let pre = g.add(starts[i], ends[j]);
                let hidden = g.relu(pre);
                out.push((
                    AnswerSpan::new(i, j),
                    g.affine(self.w2, hidden, Some(self.b2)),
                ));
            }
        }
        out
    }
}

/// Encoder plus the all-spans scorer.
#[derive(Debug, Clone, PartialEq)]
pub struct SpanNet {
    pub encoder: Encoder,
    pub scorer: SpanScorer,
}

impl SpanNet {
    pub fn build<T: Real>(
        store: &mut ParamStore<T>,
        config: &DetectorConfig,
        rng: &mut impl Rng,
    ) -> Result<Self, NnError> {
        Ok(SpanNet {
            encoder: Encoder::build(store, "enc", config.encoder, rng)?,
            scorer: SpanScorer::build(
                store,
                "span",
                config.encoder.hidden,
                config.mlp_hidden,
                rng,
            )?,
        })
    }

    pub fn bind<T: Real>(store: &ParamStore<T>, config: &DetectorConfig) -> Result<Self, NnError> {
        Ok(SpanNet {
            encoder: Encoder::bind(store, "enc", config.encoder)?,
            scorer: SpanScorer::bind(store, "span", config.encoder.hidden, config.mlp_hidden)?,
        })
    }

    pub fn logits<T: Real>(
        &self,
        g: &mut Graph<T>,
        tokens: &[usize],
        verb_index: usize,
        dropout: Option<&mut dyn RngCore>,
    ) -> Result<Vec<(AnswerSpan, NodeId)>, NnError> {
        let states = self.encoder.forward(g, tokens, verb_index, dropout)?;
        Ok(self.scorer.logits(g, &states))
    }

    /// Binary cross entropy summed over every span; `positives` are the
    /// spans that answer some question.
    pub fn loss<T: Real>(
        &self,
        g: &mut Graph<T>,
        tokens: &[usize],
        verb_index: usize,
        positives: &[AnswerSpan],
        dropout: Option<&mut dyn RngCore>,
    ) -> Result<NodeId, NnError> {
        let logits = self.logits(g, tokens, verb_index, dropout)?;
        let terms: Vec<NodeId> = logits
            .into_iter()
            .map(|(span, l)| g.sigmoid_bce(l, positives.contains(&span)))
            .collect();
        Ok(g.sum(&terms))
    }
}

#[derive(Debug, Clone, PartialEq)]
enum Net {
    Bio(BioNet),
    Span(SpanNet),
}

impl Net {
    fn bind(
        kind: DetectorKind,
        store: &ParamStore<f32>,
        config: &DetectorConfig,
    ) -> Result<Self, NnError> {
        Ok(match kind {
            DetectorKind::Bio => Net::Bio(BioNet::bind(store, config)?),
            DetectorKind::Span => Net::Span(SpanNet::bind(store, config)?),
        })
    }

    fn tag_distributions(
        &self,
        store: &ParamStore<f32>,
        ids: &[usize],
        verb: usize,
    ) -> Result<Vec<[f64; 3]>, SpanDetError> {
        let Net::Bio(net) = self else {
            return Err(SpanDetError::Unsupported("BIO"));
        };
        let mut g = Graph::new(store);
        let logits = net.logits(&mut g, ids, verb, None)?;
        Ok(logits
            .iter()
            .map(|&l| {
                let p = crate::nn::softmax(g.value(l));
                [p[0] as f64, p[1] as f64, p[2] as f64]
            })
            .collect())
    }

    fn score(
        &self,
        store: &ParamStore<f32>,
        ids: &[usize],
        verb: usize,
    ) -> Result<Vec<ScoredSpan>, SpanDetError> {
        match self {
            Net::Bio(_) => {
                let decoded = viterbi_decode(&self.tag_distributions(store, ids, verb)?);
                Ok(tags_to_spans(&decoded.tags)
                    .into_iter()
                    .map(|span| ScoredSpan {
                        span,
                        probability: decoded.log_probs[span.start..=span.end]
                            .iter()
                            .sum::<f64>()
                            .exp(),
                    })
                    .collect())
            }
            Net::Span(net) => {
                let mut g = Graph::new(store);
                let logits = net.logits(&mut g, ids, verb, None)?;
                Ok(logits
                    .into_iter()
                    .map(|(span, l)| ScoredSpan {
                        span,
                        probability: sigmoid(g.scalar(l) as f64),
                    })
                    .collect())
            }
        }
    }

    fn detect(
        &self,
        store: &ParamStore<f32>,
        ids: &[usize],
        verb: usize,
        tau: f64,
    ) -> Result<Vec<AnswerSpan>, SpanDetError> {
        let scored = self.score(store, ids, verb)?;
        match self {
            Net::Bio(_) => Ok(scored.into_iter().map(|s| s.span).collect()),
            Net::Span(_) => select_spans(&scored, tau),
        }
    }
}

fn sigmoid(x: f64) -> f64 {
    1.0 / (1.0 + (-x).exp())
}

/// A trained (or freshly initialized) span detector with its vocabulary.
#[derive(Debug, Clone)]
pub struct SpanDetector {
    pub kind: DetectorKind,
    pub config: DetectorConfig,
    pub vocab: Vocab,
    pub params: ParamStore<f32>,
    net: Net,
}

impl SpanDetector {
    /// The encoder's vocabulary size is taken from `vocab`.
    pub fn new(
        kind: DetectorKind,
        mut config: DetectorConfig,
        vocab: Vocab,
        seed: u64,
    ) -> Result<Self, SpanDetError> {
        config.encoder.vocab_size = vocab.len();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut params = ParamStore::new();
        let net = match kind {
            DetectorKind::Bio => Net::Bio(BioNet::build(&mut params, &config, &mut rng)?),
            DetectorKind::Span => Net::Span(SpanNet::build(&mut params, &config, &mut rng)?),
        };
        Ok(SpanDetector {
            kind,
            config,
            vocab,
            params,
            net,
        })
    }

    pub fn encoder(&self) -> &Encoder {
        match &self.net {
            Net::Bio(n) => &n.encoder,
            Net::Span(n) => &n.encoder,
        }
    }

    /// Trains on `train`, early-stopping on exact-match F1 over `dev` at
    /// threshold 0.5 (or on training loss when `dev` is empty).
    pub fn train(
        &mut self,
        train: &[VerbInstance],
        dev: &[VerbInstance],
        config: &TrainConfig,
    ) -> Result<TrainReport, SpanDetError> {
        let examples: Vec<(Vec<usize>, usize, Vec<AnswerSpan>, Vec<Tag>)> = train
            .iter()
            .map(|inst| {
                let spans = inst.answer_spans();
                let tags = spans_to_tags(&super::canonical_projection(&spans), inst.tokens.len())?;
                Ok((self.vocab.ids(&inst.tokens), inst.verb_index, spans, tags))
            })
            .collect::<Result<_, SpanDetError>>()?;
        let dev_ids: Vec<Vec<usize>> = dev.iter().map(|d| self.vocab.ids(&d.tokens)).collect();
        let SpanDetector { net, params, .. } = self;
        let net = &*net;
        let report = train_loop(
            params,
            &examples,
            config,
            |g, (ids, verb, spans, tags), rng| match net {
                Net::Bio(n) => n.loss(g, ids, *verb, tags, Some(rng)),
                Net::Span(n) => n.loss(g, ids, *verb, spans, Some(rng)),
            },
            |store, _| {
                if dev.is_empty() {
                    return None;
                }
                let mut counts = PrfCounts::default();
                for (inst, ids) in dev.iter().zip(&dev_ids) {
                    let predicted = net.detect(store, ids, inst.verb_index, 0.5).ok()?;
                    counts.add(span_detection_counts(
                        &predicted,
                        &inst.gold,
                        &Matcher::exact(),
                    ));
                }
                Some(counts.prf().f1)
            },
        )?;
        Ok(report)
    }

    /// Every span with its probability (span model), or the decoded spans
    /// with the product of their tag probabilities (BIO model).
    pub fn score(
        &self,
        tokens: &[String],
        verb_index: usize,
    ) -> Result<Vec<ScoredSpan>, SpanDetError> {
        self.net
            .score(&self.params, &self.vocab.ids(tokens), verb_index)
    }

    pub fn tag_distributions(
        &self,
        tokens: &[String],
        verb_index: usize,
    ) -> Result<Vec<[f64; 3]>, SpanDetError> {
        self.net
            .tag_distributions(&self.params, &self.vocab.ids(tokens), verb_index)
    }

    /// Spans above `tau`; the BIO model ignores `tau`.
    pub fn detect(
        &self,
        tokens: &[String],
        verb_index: usize,
        tau: f64,
    ) -> Result<Vec<AnswerSpan>, SpanDetError> {
        self.net
            .detect(&self.params, &self.vocab.ids(tokens), verb_index, tau)
    }

    pub fn evaluate(
        &self,
        instances: &[VerbInstance],
        tau: f64,
        matcher: &Matcher,
    ) -> Result<Prf, SpanDetError> {
        let mut counts = PrfCounts::default();
        for inst in instances {
            counts.add(span_detection_counts(
                &self.detect(&inst.tokens, inst.verb_index, tau)?,
                &inst.gold,
                matcher,
            ));
        }
        Ok(counts.prf())
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<(), SpanDetError> {
        let hyper = serde_json::to_value(self.config).map_err(NnError::from)?;
        save_checkpoint(
            path,
            self.kind.checkpoint_kind(),
            hyper,
            &self.vocab,
            &self.params,
        )?;
        Ok(())
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self, SpanDetError> {
        let (manifest, params) = load_checkpoint(path)?;
        let kind = [DetectorKind::Bio, DetectorKind::Span]
            .into_iter()
            .find(|k| k.checkpoint_kind() == manifest.kind)
            .ok_or_else(|| SpanDetError::WrongKind {
                expected: "span detector".into(),
                found: manifest.kind.clone(),
            })?;
        let config: DetectorConfig =
            serde_json::from_value(manifest.hyperparameters).map_err(NnError::from)?;
        if config.encoder.vocab_size != manifest.vocab.len() {
            return Err(
                NnError::Checkpoint("vocabulary size disagrees with encoder".into()).into(),
            );
        }
        let net = Net::bind(kind, &params, &config)?;
        Ok(SpanDetector {
            kind,
            config,
            vocab: manifest.vocab,
            params,
            net,
        })
    }
}
