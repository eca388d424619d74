use std::path::Path;

use rand::{Rng, RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::{QgenError, SlotDistributions};
use crate::corpus::AnswerSpan;
use crate::dataset::VerbInstance;
use crate::grammar::{Grammar, QuestionSlots, Slot};
use crate::metrics::{question_accuracy, QuestionScores};
use crate::nn::{
    init_glorot, init_normal, load_checkpoint, save_checkpoint, softmax, train_loop, Encoder,
    EncoderConfig, Graph, LstmCell, NnError, NodeId, ParamId, ParamStore, Real, Tensor,
    TrainConfig, TrainReport, Vocab,
};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub enum QgenKind {
    Local,
    Sequential,
}

impl QgenKind {
    pub fn checkpoint_kind(self) -> &'static str {
        match self {
            QgenKind::Local => "qgenLocal",
            QgenKind::Sequential => "qgenSequential",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct QgenConfig {
    pub encoder: EncoderConfig,
    pub mlp_hidden: usize,
    pub decoder_hidden: usize,
    pub decoder_layers: usize,
    /// Size of previous-slot value embeddings.
    pub token_dim: usize,
    pub slot_sizes: [usize; 7],
}

pub fn grammar_slot_sizes(grammar: &Grammar) -> [usize; 7] {
    Slot::ALL.map(|s| grammar.vocabulary(s).len())
}

impl QgenConfig {
    pub fn full_size(vocab_size: usize) -> Self {
        QgenConfig {
            encoder: EncoderConfig::new(vocab_size),
            mlp_hidden: 100,
            decoder_hidden: 200,
            decoder_layers: 4,
            token_dim: 100,
            slot_sizes: grammar_slot_sizes(Grammar::standard()),
        }
    }

    fn span_dim(&self) -> usize {
        2 * self.encoder.hidden
    }
}

/// A shared rectified hidden layer followed by one affine output per slot.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SlotHeads {
    pub w1: ParamId,
    pub b1: ParamId,
    pub outputs: Vec<(ParamId, ParamId)>,
}

impl SlotHeads {
    fn build<T: Real>(
        store: &mut ParamStore<T>,
        prefix: &str,
        input: usize,
        config: &QgenConfig,
        rng: &mut impl Rng,
    ) -> Result<Self, NnError> {
        let h = config.mlp_hidden;
        let w1 = store.add(format!("{prefix}.w1"), init_glorot(h, input, rng))?;
        let b1 = store.add(format!("{prefix}.b1"), Tensor::zeros(&[h]))?;
        let mut outputs = Vec::new();
        for (slot, &size) in Slot::ALL.iter().zip(&config.slot_sizes) {
            let w = store.add(
                format!("{prefix}.{}.w", slot.name()),
                init_glorot(size, h, rng),
            )?;
            let b = store.add(
                format!("{prefix}.{}.b", slot.name()),
                Tensor::zeros(&[size]),
            )?;
            outputs.push((w, b));
        }
        Ok(SlotHeads { w1, b1, outputs })
    }

    fn bind<T: Real>(
        store: &ParamStore<T>,
        prefix: &str,
        input: usize,
        config: &QgenConfig,
    ) -> Result<Self, NnError> {
        let h = config.mlp_hidden;
        let w1 = store.expect(&format!("{prefix}.w1"), &[h, input])?;
        let b1 = store.expect(&format!("{prefix}.b1"), &[h])?;
        let mut outputs = Vec::new();
        for (slot, &size) in Slot::ALL.iter().zip(&config.slot_sizes) {
            outputs.push((
                store.expect(&format!("{prefix}.{}.w", slot.name()), &[size, h])?,
                store.expect(&format!("{prefix}.{}.b", slot.name()), &[size])?,
            ));
        }
        Ok(SlotHeads { w1, b1, outputs })
    }

    fn hidden<T: Real>(&self, g: &mut Graph<T>, x: NodeId) -> NodeId {
        let pre = g.affine(self.w1, x, Some(self.b1));
        g.relu(pre)
    }

    fn logits<T: Real>(&self, g: &mut Graph<T>, hidden: NodeId, slot: usize) -> NodeId {
        let (w, b) = self.outputs[slot];
        g.affine(w, hidden, Some(b))
    }
}

fn span_repr<T: Real>(g: &mut Graph<T>, states: &[NodeId], span: AnswerSpan) -> NodeId {
    g.concat(&[states[span.start], states[span.end]])
}

fn check_span(span: AnswerSpan, len: usize) -> Result<(), QgenError> {
    if span.end < len {
        Ok(())
    } else {
        Err(QgenError::SpanOutOfBounds { span, len })
    }
}

/// Encoder plus independent per-slot classifiers over `[h_i; h_j]`.
#[derive(Debug, Clone, PartialEq)]
pub struct LocalNet {
    pub encoder: Encoder,
    pub heads: SlotHeads,
}

impl LocalNet {
    pub fn build<T: Real>(
        store: &mut ParamStore<T>,
        config: &QgenConfig,
        rng: &mut impl Rng,
    ) -> Result<Self, NnError> {
        Ok(LocalNet {
            encoder: Encoder::build(store, "enc", config.encoder, rng)?,
            heads: SlotHeads::build(store, "local", config.span_dim(), config, rng)?,
        })
    }

    pub fn bind<T: Real>(store: &ParamStore<T>, config: &QgenConfig) -> Result<Self, NnError> {
        Ok(LocalNet {
            encoder: Encoder::bind(store, "enc", config.encoder)?,
            heads: SlotHeads::bind(store, "local", config.span_dim(), config)?,
        })
    }

    /// Seven logit vectors for the span.
    pub fn slot_logits<T: Real>(
        &self,
        g: &mut Graph<T>,
        states: &[NodeId],
        span: AnswerSpan,
    ) -> Vec<NodeId> {
        let s = span_repr(g, states, span);
        let hidden = self.heads.hidden(g, s);
        (0..Slot::ALL.len())
            .map(|k| self.heads.logits(g, hidden, k))
            .collect()
    }

    pub fn loss<T: Real>(
        &self,
        g: &mut Graph<T>,
        tokens: &[usize],
        verb_index: usize,
        span: AnswerSpan,
        gold: &[usize; 7],
        dropout: Option<&mut dyn RngCore>,
    ) -> Result<NodeId, NnError> {
        let states = self.encoder.forward(g, tokens, verb_index, dropout)?;
        let logits = self.slot_logits(g, &states, span);
        let terms: Vec<NodeId> = logits
            .iter()
            .zip(gold)
            .map(|(&l, &y)| g.softmax_xent(l, y))
            .collect();
        Ok(g.sum(&terms))
    }
}

/// Encoder plus a slot-by-slot decoder with its own stack of LSTM cells for
/// every slot. Slot `k` reads `[s; e(y_{k-1})]`, where `e` embeds the
/// previous slot's value (a learned start vector for the first slot).
#[derive(Debug, Clone, PartialEq)]
pub struct SeqNet {
    pub encoder: Encoder,
    pub start: ParamId,
    /// Embedding table of slot `k`'s values, used as input to slot `k + 1`.
    pub value_embeddings: Vec<ParamId>,
    pub cells: Vec<Vec<LstmCell>>,
    pub heads: SlotHeads,
}

impl SeqNet {
    fn cell_input(config: &QgenConfig, layer: usize) -> usize {
        if layer == 0 {
            config.span_dim() + config.token_dim
        } else {
            config.decoder_hidden
        }
    }

    pub fn build<T: Real>(
        store: &mut ParamStore<T>,
        config: &QgenConfig,
        rng: &mut impl Rng,
    ) -> Result<Self, NnError> {
        let encoder = Encoder::build(store, "enc", config.encoder, rng)?;
        let start = store.add("seq.start", init_normal(&[config.token_dim], 0.1, rng))?;
        let mut value_embeddings = Vec::new();
        for (slot, &size) in Slot::ALL.iter().zip(&config.slot_sizes).take(6) {
            value_embeddings.push(store.add(
                format!("seq.emb.{}", slot.name()),
                init_normal(&[size, config.token_dim], 0.1, rng),
            )?);
        }
        let mut cells = Vec::new();
        for slot in Slot::ALL {
            let mut stack = Vec::new();
            for l in 0..config.decoder_layers {
                let prefix = format!("seq.{}.l{l}", slot.name());
                stack.push(LstmCell::build(
                    store,
                    &prefix,
                    Self::cell_input(config, l),
                    config.decoder_hidden,
                    rng,
                )?);
            }
            cells.push(stack);
        }
        let heads = SlotHeads::build(store, "seq.out", config.decoder_hidden, config, rng)?;
        Ok(SeqNet {
            encoder,
            start,
            value_embeddings,
            cells,
            heads,
        })
    }

    pub fn bind<T: Real>(store: &ParamStore<T>, config: &QgenConfig) -> Result<Self, NnError> {
        let encoder = Encoder::bind(store, "enc", config.encoder)?;
        let start = store.expect("seq.start", &[config.token_dim])?;
        let mut value_embeddings = Vec::new();
        for (slot, &size) in Slot::ALL.iter().zip(&config.slot_sizes).take(6) {
            value_embeddings.push(store.expect(
                &format!("seq.emb.{}", slot.name()),
                &[size, config.token_dim],
            )?);
        }
        let mut cells = Vec::new();
        for slot in Slot::ALL {
            let mut stack = Vec::new();
            for l in 0..config.decoder_layers {
                let prefix = format!("seq.{}.l{l}", slot.name());
                stack.push(LstmCell::bind(
                    store,
                    &prefix,
                    Self::cell_input(config, l),
                    config.decoder_hidden,
                )?);
            }
            cells.push(stack);
        }
        let heads = SlotHeads::bind(store, "seq.out", config.decoder_hidden, config)?;
        Ok(SeqNet {
            encoder,
            start,
            value_embeddings,
            cells,
            heads,
        })
    }

    fn initial_state<T: Real>(&self, g: &mut Graph<T>) -> Vec<(NodeId, NodeId)> {
        self.cells[0]
            .iter()
            .map(|c| {
                (
                    g.input(vec![T::zero(); c.hidden]),
                    g.input(vec![T::zero(); c.hidden]),
                )
            })
            .collect()
    }

    /// Logits for slot `k` given the previous slot's value, updating `state`.
    fn step<T: Real>(
        &self,
        g: &mut Graph<T>,
        s: NodeId,
        k: usize,
        previous: Option<usize>,
        state: &mut [(NodeId, NodeId)],
    ) -> NodeId {
        let prev = match previous {
            None => g.param(self.start),
            Some(v) => g.row(self.value_embeddings[k - 1], v),
        };
        let mut input = g.concat(&[s, prev]);
        for (cell, st) in self.cells[k].iter().zip(state.iter_mut()) {
            let (h, c) = cell.step(g, input, st.0, st.1);
            *st = (h, c);
            input = h;
        }
        let hidden = self.heads.hidden(g, input);
        self.heads.logits(g, hidden, k)
    }

    /// Teacher-forced logits for all slots.
    pub fn forced_logits<T: Real>(
        &self,
        g: &mut Graph<T>,
        states: &[NodeId],
        span: AnswerSpan,
        gold: &[usize; 7],
    ) -> Vec<NodeId> {
        let s = span_repr(g, states, span);
        let mut state = self.initial_state(g);
        (0..7)
            .map(|k| {
                self.step(
                    g,
                    s,
                    k,
                    if k == 0 { None } else { Some(gold[k - 1]) },
                    &mut state,
                )
            })
            .collect()
    }

    /// Greedy decoding: each slot takes the argmax value, which feeds the
    /// next slot. Returns the choices and their distributions.
    pub fn greedy<T: Real>(
        &self,
        g: &mut Graph<T>,
        states: &[NodeId],
        span: AnswerSpan,
    ) -> ([usize; 7], SlotDistributions) {
        let s = span_repr(g, states, span);
        let mut state = self.initial_state(g);
        let mut chosen = [0usize; 7];
        let mut dists = Vec::with_capacity(7);
        for k in 0..7 {
            let logits = self.step(
                g,
                s,
                k,
                if k == 0 { None } else { Some(chosen[k - 1]) },
                &mut state,
            );
            let p: Vec<f64> = softmax(g.value(logits))
                .iter()
                .map(|x| x.to_f64().unwrap_or(f64::NAN))
                .collect();
            chosen[k] = argmax(&p);
            dists.push(p);
        }
        (chosen, dists)
    }

    pub fn loss<T: Real>(
        &self,
        g: &mut Graph<T>,
        tokens: &[usize],
        verb_index: usize,
        span: AnswerSpan,
        gold: &[usize; 7],
        dropout: Option<&mut dyn RngCore>,
    ) -> Result<NodeId, NnError> {
        let states = self.encoder.forward(g, tokens, verb_index, dropout)?;
        let logits = self.forced_logits(g, &states, span, gold);
        let terms: Vec<NodeId> = logits
            .iter()
            .zip(gold)
            .map(|(&l, &y)| g.softmax_xent(l, y))
            .collect();
        Ok(g.sum(&terms))
    }
}

/// First index of the maximum; ties go to the earlier value.
fn argmax(p: &[f64]) -> usize {
    let mut best = 0;
    for (i, &x) in p.iter().enumerate() {
        if x > p[best] {
            best = i;
        }
    }
    best
}

#[derive(Debug, Clone, PartialEq)]
enum Net {
    Local(LocalNet),
    Seq(SeqNet),
}

impl Net {
    fn bind(kind: QgenKind, store: &ParamStore<f32>, config: &QgenConfig) -> Result<Self, NnError> {
        Ok(match kind {
            QgenKind::Local => Net::Local(LocalNet::bind(store, config)?),
            QgenKind::Sequential => Net::Seq(SeqNet::bind(store, config)?),
        })
    }

    fn encoder(&self) -> &Encoder {
        match self {
            Net::Local(n) => &n.encoder,
            Net::Seq(n) => &n.encoder,
        }
    }

    fn loss(
        &self,
        g: &mut Graph<f32>,
        ex: &Example,
        dropout: Option<&mut dyn RngCore>,
    ) -> Result<NodeId, NnError> {
        match self {
            Net::Local(n) => n.loss(g, &ex.ids, ex.verb_index, ex.span, &ex.gold, dropout),
            Net::Seq(n) => n.loss(g, &ex.ids, ex.verb_index, ex.span, &ex.gold, dropout),
        }
    }

    /// Predicted slot indices and distributions for each span, sharing one
    /// encoder pass.
    fn predict(
        &self,
        store: &ParamStore<f32>,
        ids: &[usize],
        verb_index: usize,
        spans: &[AnswerSpan],
    ) -> Result<Vec<([usize; 7], SlotDistributions)>, QgenError> {
        for &span in spans {
            check_span(span, ids.len())?;
        }
        let mut g = Graph::new(store);
        let states = self.encoder().forward(&mut g, ids, verb_index, None)?;
        Ok(spans
            .iter()
            .map(|&span| match self {
                Net::Local(n) => {
                    let logits = n.slot_logits(&mut g, &states, span);
                    let dists: SlotDistributions = logits
                        .iter()
                        .map(|&l| {
                            softmax(g.value(l))
                                .iter()
                                .map(|&x| x as f64)
                                .collect::<Vec<f64>>()
                        })
                        .collect();
                    let chosen: [usize; 7] = std::array::from_fn(|k| argmax(&dists[k]));
                    (chosen, dists)
                }
                Net::Seq(n) => n.greedy(&mut g, &states, span),
            })
            .collect())
    }
}

#[derive(Debug, Clone)]
struct Example {
    ids: Vec<usize>,
    verb_index: usize,
    span: AnswerSpan,
    gold: [usize; 7],
}

/// A generated question with the product of its chosen slot probabilities.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Generated {
    pub slots: QuestionSlots,
    pub probability: f64,
}

#[derive(Debug, Clone)]
pub struct QuestionGenerator {
    pub kind: QgenKind,
    pub config: QgenConfig,
    pub vocab: Vocab,
    pub params: ParamStore<f32>,
    net: Net,
}

impl QuestionGenerator {
    /// The encoder's vocabulary size is taken from `vocab` and the slot
    /// vocabularies from the standard grammar.
    pub fn new(
        kind: QgenKind,
        mut config: QgenConfig,
        vocab: Vocab,
        seed: u64,
    ) -> Result<Self, QgenError> {
        config.encoder.vocab_size = vocab.len();
        config.slot_sizes = grammar_slot_sizes(Grammar::standard());
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut params = ParamStore::new();
        let net = match kind {
            QgenKind::Local => Net::Local(LocalNet::build(&mut params, &config, &mut rng)?),
            QgenKind::Sequential => Net::Seq(SeqNet::build(&mut params, &config, &mut rng)?),
        };
        Ok(QuestionGenerator {
            kind,
            config,
            vocab,
            params,
            net,
        })
    }

    pub fn encoder(&self) -> &Encoder {
        match &self.net {
            Net::Local(n) => &n.encoder,
            Net::Seq(n) => &n.encoder,
        }
    }

    fn examples(&self, instances: &[VerbInstance]) -> Result<Vec<Example>, QgenError> {
        let grammar = Grammar::standard();
        let mut out = Vec::new();
        for inst in instances {
            let ids = self.vocab.ids(&inst.tokens);
            for q in &inst.gold {
                let gold = grammar
                    .slot_indices(&q.slots)
                    .ok_or(QgenError::UnknownValue)?;
                for &span in &q.spans {
                    check_span(span, ids.len())?;
                    out.push(Example {
                        ids: ids.clone(),
                        verb_index: inst.verb_index,
                        span,
                        gold,
                    });
                }
            }
        }
        Ok(out)
    }

    /// Trains on every (gold question, answer span) pair of `train`,
    /// early-stopping on exact-match accuracy over `dev` (or training loss
    /// when `dev` is empty).
    pub fn train(
        &mut self,
        train: &[VerbInstance],
        dev: &[VerbInstance],
        config: &TrainConfig,
    ) -> Result<TrainReport, QgenError> {
        let examples = self.examples(train)?;
        let dev_examples = self.examples(dev)?;
        let QuestionGenerator { net, params, .. } = self;
        let net = &*net;
        let report = train_loop(
            params,
            &examples,
            config,
            |g, ex, rng| net.loss(g, ex, Some(rng)),
            |store, _| {
                if dev_examples.is_empty() {
                    return None;
                }
                let mut correct = 0usize;
                for ex in &dev_examples {
                    let (chosen, _) = net
                        .predict(store, &ex.ids, ex.verb_index, &[ex.span])
                        .ok()?
                        .pop()?;
                    correct += (chosen == ex.gold) as usize;
                }
                Some(correct as f64 / dev_examples.len() as f64)
            },
        )?;
        Ok(report)
    }

    /// Per-slot distributions for one span (the greedy path's, for the
    /// sequential model).
    pub fn distributions(
        &self,
        tokens: &[String],
        verb_index: usize,
        span: AnswerSpan,
    ) -> Result<SlotDistributions, QgenError> {
        let mut out =
            self.net
                .predict(&self.params, &self.vocab.ids(tokens), verb_index, &[span])?;
        Ok(out.pop().expect("one span").1)
    }

    /// One question per span.
    pub fn generate(
        &self,
        tokens: &[String],
        verb_index: usize,
        spans: &[AnswerSpan],
    ) -> Result<Vec<Generated>, QgenError> {
        let grammar = Grammar::standard();
        Ok(self
            .net
            .predict(&self.params, &self.vocab.ids(tokens), verb_index, spans)?
            .into_iter()
            .map(|(chosen, dists)| Generated {
                slots: grammar.slots_from_indices(&chosen),
                probability: chosen.iter().zip(&dists).map(|(&c, d)| d[c]).product(),
            })
            .collect())
    }

    /// Accuracy of questions generated from gold spans.
    pub fn evaluate(&self, instances: &[VerbInstance]) -> Result<QuestionScores, QgenError> {
        let mut scores = QuestionScores::default();
        for inst in instances {
            for q in &inst.gold {
                for g in self.generate(&inst.tokens, inst.verb_index, &q.spans)? {
                    scores.add(&question_accuracy(&g.slots, &q.slots));
                }
            }
        }
        Ok(scores)
    }

    /// Mean teacher-forced negative log-likelihood per slot on `instances`.
    pub fn forced_loss_per_slot(&self, instances: &[VerbInstance]) -> Result<f64, QgenError> {
        let examples = self.examples(instances)?;
        let mut total = 0.0;
        for ex in &examples {
            let mut g = Graph::new(&self.params);
            let loss = self.net.loss(&mut g, ex, None)?;
            total += g.scalar(loss) as f64;
        }
        Ok(total / (7 * examples.len().max(1)) as f64)
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<(), QgenError> {
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

    pub fn load(path: impl AsRef<Path>) -> Result<Self, QgenError> {
        let (manifest, params) = load_checkpoint(path)?;
        let kind = [QgenKind::Local, QgenKind::Sequential]
            .into_iter()
            .find(|k| k.checkpoint_kind() == manifest.kind)
            .ok_or_else(|| QgenError::WrongKind(manifest.kind.clone()))?;
        let config: QgenConfig =
            serde_json::from_value(manifest.hyperparameters).map_err(NnError::from)?;
        let expected = grammar_slot_sizes(Grammar::standard());
        if config.slot_sizes != expected {
            return Err(QgenError::VocabularyMismatch {
                expected,
                found: config.slot_sizes,
            });
        }
        if config.encoder.vocab_size != manifest.vocab.len() {
            return Err(
                NnError::Checkpoint("vocabulary size disagrees with encoder".into()).into(),
            );
        }
        let net = Net::bind(kind, &params, &config)?;
        Ok(QuestionGenerator {
            kind,
            config,
            vocab: manifest.vocab,
            params,
            net,
        })
    }
}
