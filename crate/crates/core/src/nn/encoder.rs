use rand::{Rng, RngCore};
use serde::{Deserialize, Serialize};

use super::{
    init_glorot, init_normal, real, shape_error, Graph, LstmCell, NnError, NodeId, ParamId,
    ParamStore, Real, Tensor,
};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct EncoderConfig {
    pub vocab_size: usize,
    pub word_dim: usize,
    pub predicate_dim: usize,
    pub hidden: usize,
    pub layers: usize,
    pub recurrent_dropout: f64,
}

impl EncoderConfig {
    pub fn new(vocab_size: usize) -> Self {
        EncoderConfig {
            vocab_size,
            word_dim: 100,
            predicate_dim: 100,
            hidden: 300,
            layers: 4,
            recurrent_dropout: 0.1,
        }
    }

    pub fn input_dim(&self) -> usize {
        self.word_dim + self.predicate_dim
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
struct Layer {
    cell: LstmCell,
    gate_w: ParamId,
    gate_b: ParamId,
    proj: ParamId,
}

/// Stacked LSTM whose layers alternate direction, with highway connections
/// between layers and recurrent dropout on the carried hidden state.
///
/// Each layer computes `h' = LSTM(x, h_prev)`, a gate
/// `r = σ(W_r [x; h_prev] + b_r)` and outputs `r ⊙ h' + (1 − r) ⊙ W_p x`.
/// Inputs are word embeddings concatenated with an embedding of the
/// predicate indicator.
#[derive(Debug, Clone, PartialEq)]
pub struct Encoder {
    pub config: EncoderConfig,
    word_emb: ParamId,
    pred_emb: ParamId,
    layers: Vec<Layer>,
}

impl Encoder {
    pub fn build<T: Real>(
        store: &mut ParamStore<T>,
        prefix: &str,
        config: EncoderConfig,
        rng: &mut impl Rng,
    ) -> Result<Self, NnError> {
        let word_emb = store.add(
            format!("{prefix}.word_emb"),
            init_normal(&[config.vocab_size, config.word_dim], 0.1, rng),
        )?;
        let pred_emb = store.add(
            format!("{prefix}.pred_emb"),
            init_normal(&[2, config.predicate_dim], 0.1, rng),
        )?;
        let h = config.hidden;
        let mut layers = Vec::with_capacity(config.layers);
        for l in 0..config.layers {
            let input = if l == 0 { config.input_dim() } else { h };
            let p = format!("{prefix}.l{l}");
            let cell = LstmCell::build(store, &format!("{p}.lstm"), input, h, rng)?;
            let gate_w = store.add(format!("{p}.highway.w"), init_glorot(h, input + h, rng))?;
            let gate_b = store.add(format!("{p}.highway.b"), Tensor::zeros(&[h]))?;
            let proj = store.add(format!("{p}.highway.proj"), init_glorot(h, input, rng))?;
            layers.push(Layer {
                cell,
                gate_w,
                gate_b,
                proj,
            });
        }
        Ok(Encoder {
            config,
            word_emb,
            pred_emb,
            layers,
        })
    }

    pub fn bind<T: Real>(
        store: &ParamStore<T>,
        prefix: &str,
        config: EncoderConfig,
    ) -> Result<Self, NnError> {
        let word_emb = store.expect(
            &format!("{prefix}.word_emb"),
            &[config.vocab_size, config.word_dim],
        )?;
        let pred_emb = store.expect(&format!("{prefix}.pred_emb"), &[2, config.predicate_dim])?;
        let h = config.hidden;
        let mut layers = Vec::with_capacity(config.layers);
        for l in 0..config.layers {
            let input = if l == 0 { config.input_dim() } else { h };
            let p = format!("{prefix}.l{l}");
            layers.push(Layer {
                cell: LstmCell::bind(store, &format!("{p}.lstm"), input, h)?,
                gate_w: store.expect(&format!("{p}.highway.w"), &[h, input + h])?,
                gate_b: store.expect(&format!("{p}.highway.b"), &[h])?,
                proj: store.expect(&format!("{p}.highway.proj"), &[h, input])?,
            });
        }
        Ok(Encoder {
            config,
            word_emb,
            pred_emb,
            layers,
        })
    }

    pub fn word_embeddings(&self) -> ParamId {
        self.word_emb
    }

    /// One output vector per token. Dropout masks are drawn from `dropout`
    /// when given (training); without it the encoder is deterministic.
    pub fn forward<T: Real>(
        &self,
        g: &mut Graph<T>,
        tokens: &[usize],
        verb_index: usize,
        mut dropout: Option<&mut dyn RngCore>,
    ) -> Result<Vec<NodeId>, NnError> {
        if tokens.is_empty() {
            return Err(shape_error("encoder input", &[1], &[0]));
        }
        if verb_index >= tokens.len() {
            return Err(shape_error("verb index", &[tokens.len()], &[verb_index]));
        }
        if let Some(&bad) = tokens.iter().find(|&&t| t >= self.config.vocab_size) {
            return Err(shape_error("token id", &[self.config.vocab_size], &[bad]));
        }
        let mut xs: Vec<NodeId> = tokens
            .iter()
            .enumerate()
            .map(|(i, &t)| {
                let w = g.row(self.word_emb, t);
                let p = g.row(self.pred_emb, (i == verb_index) as usize);
                g.concat(&[w, p])
            })
            .collect();
        let h = self.config.hidden;
        let p = self.config.recurrent_dropout;
        for (l, layer) in self.layers.iter().enumerate() {
            let mask: Option<Vec<T>> = match dropout.as_deref_mut() {
                Some(rng) if p > 0.0 => {
                    let keep: T = real(1.0 / (1.0 - p));
                    Some(
                        (0..h)
                            .map(|_| {
                                if rng.random::<f64>() < p {
                                    T::zero()
                                } else {
                                    keep
                                }
                            })
                            .collect(),
                    )
                }
                _ => None,
            };
            let mut outputs = vec![xs[0]; xs.len()];
            let mut h_prev = g.input(vec![T::zero(); h]);
            let mut c_prev = g.input(vec![T::zero(); h]);
            let order: Vec<usize> = if l % 2 == 0 {
                (0..xs.len()).collect()
            } else {
                (0..xs.len()).rev().collect()
            };
            for t in order {
                let x = xs[t];
                let carried = match &mask {
                    Some(m) => g.mask(h_prev, m.clone()),
                    None => h_prev,
                };
                let xh = g.concat(&[x, carried]);
                let (cell_out, c) = layer.cell.step_concat(g, xh, c_prev);
                let gate = g.affine(layer.gate_w, xh, Some(layer.gate_b));
                let r = g.sigmoid(gate);
                let through = g.mul(r, cell_out);
                let not_r = g.one_minus(r);
                let projected = g.affine(layer.proj, x, None);
                let skip = g.mul(not_r, projected);
                let out = g.add(through, skip);
                outputs[t] = out;
                h_prev = out;
                c_prev = c;
            }
            xs = outputs;
        }
        Ok(xs)
    }
}
