use rand::seq::SliceRandom;
use rand::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::{
    clip_global_norm, Adadelta, AdadeltaConfig, Grads, Graph, NnError, NodeId, ParamStore,
};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct TrainConfig {
    pub max_epochs: usize,
    /// Epochs without improvement before stopping.
    pub patience: usize,
    pub batch_size: usize,
    pub optimizer: AdadeltaConfig,
    pub clip_norm: f64,
    pub seed: u64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            max_epochs: 40,
            patience: 10,
            batch_size: 80,
            optimizer: AdadeltaConfig::default(),
            clip_norm: 1.0,
            seed: 1,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct EpochStats {
    pub epoch: usize,
    pub train_loss: f64,
    pub dev_score: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct TrainReport {
    pub epochs: Vec<EpochStats>,
    pub best_epoch: usize,
    pub stopped_early: bool,
}

/// Minibatch training with gradient clipping and early stopping.
///
/// `loss` builds one example's loss on a fresh graph; the rng it receives
/// drives dropout. `dev` scores the current parameters (higher is better);
/// when it returns `None` the negated training loss is used instead. The
/// best parameters seen are restored before returning.
pub fn train_loop<E>(
    store: &mut ParamStore<f32>,
    examples: &[E],
    config: &TrainConfig,
    loss: impl Fn(&mut Graph<f32>, &E, &mut dyn RngCore) -> Result<NodeId, NnError>,
    mut dev: impl FnMut(&ParamStore<f32>, &EpochStats) -> Option<f64>,
) -> Result<TrainReport, NnError> {
    if examples.is_empty() {
        return Err(NnError::EmptyTrainingSet);
    }
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let mut optimizer = Adadelta::new(store, config.optimizer);
    let mut order: Vec<usize> = (0..examples.len()).collect();
    let mut report = TrainReport {
        epochs: Vec::new(),
        best_epoch: 0,
        stopped_early: false,
    };
    let mut best: Option<(f64, ParamStore<f32>)> = None;
    let mut grads = Grads::zeros_like(store);
    for epoch in 1..=config.max_epochs {
        order.shuffle(&mut rng);
        let mut total = 0.0;
        for batch in order.chunks(config.batch_size.max(1)) {
            grads.fill_zero();
            for &i in batch {
                let mut g = Graph::new(store);
                let out = loss(&mut g, &examples[i], &mut rng)?;
                let value = g.scalar(out) as f64;
                if !value.is_finite() {
                    return Err(NnError::NonFinite(value));
                }
                total += value;
                g.backward_into(out, &mut grads);
            }
            grads.scale(1.0 / batch.len() as f32);
            clip_global_norm(&mut grads, config.clip_norm);
            optimizer.step(store, &grads)?;
        }
        let mut stats = EpochStats {
            epoch,
            train_loss: total / examples.len() as f64,
            dev_score: None,
        };
        stats.dev_score = dev(store, &stats);
        let score = stats.dev_score.unwrap_or(-stats.train_loss);
        report.epochs.push(stats);
        if best.as_ref().is_none_or(|(b, _)| score > *b) {
            best = Some((score, store.clone()));
            report.best_epoch = epoch;
        } else if epoch - report.best_epoch >= config.patience {
            report.stopped_early = true;
            break;
        }
    }
    if let Some((_, params)) = best {
        *store = params;
    }
    Ok(report)
}
