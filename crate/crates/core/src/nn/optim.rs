use serde::{Deserialize, Serialize};

use super::{real, shape_error, Grads, NnError, ParamStore, Real};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct AdadeltaConfig {
    pub rho: f64,
    pub epsilon: f64,
    pub learning_rate: f64,
}

impl Default for AdadeltaConfig {
    fn default() -> Self {
        AdadeltaConfig {
            rho: 0.95,
            epsilon: 1e-6,
            learning_rate: 1.0,
        }
    }
}

/// Adadelta with per-coordinate running averages of squared gradients and
/// squared updates.
#[derive(Debug, Clone)]
pub struct Adadelta<T> {
    pub config: AdadeltaConfig,
    mean_sq_grad: Vec<Vec<T>>,
    mean_sq_delta: Vec<Vec<T>>,
}

impl<T: Real> Adadelta<T> {
    pub fn new(store: &ParamStore<T>, config: AdadeltaConfig) -> Self {
        let zeros: Vec<Vec<T>> = store
            .ids()
            .map(|id| vec![T::zero(); store.get(id).len()])
            .collect();
        Adadelta {
            config,
            mean_sq_grad: zeros.clone(),
            mean_sq_delta: zeros,
        }
    }

    pub fn step(&mut self, store: &mut ParamStore<T>, grads: &Grads<T>) -> Result<(), NnError> {
        if grads.data.len() != self.mean_sq_grad.len() {
            return Err(shape_error(
                "gradient count",
                &[self.mean_sq_grad.len()],
                &[grads.data.len()],
            ));
        }
        let rho: T = real(self.config.rho);
        let eps: T = real(self.config.epsilon);
        let lr: T = real(self.config.learning_rate);
        let one = T::one();
        for id in store.ids().collect::<Vec<_>>() {
            let g = grads.get(id);
            let params = &mut store.get_mut(id).data;
            if g.len() != params.len() {
                return Err(shape_error("gradient", &[params.len()], &[g.len()]));
            }
            let eg = &mut self.mean_sq_grad[id.0];
            let ed = &mut self.mean_sq_delta[id.0];
            for k in 0..params.len() {
                eg[k] = rho * eg[k] + (one - rho) * g[k] * g[k];
                let delta = -((ed[k] + eps).sqrt() / (eg[k] + eps).sqrt()) * g[k];
                ed[k] = rho * ed[k] + (one - rho) * delta * delta;
                params[k] += lr * delta;
            }
        }
        Ok(())
    }
}

/// Rescales `grads` so their global norm is at most `max_norm`; returns the
/// norm before clipping.
pub fn clip_global_norm<T: Real>(grads: &mut Grads<T>, max_norm: f64) -> f64 {
    let norm = grads.global_norm().to_f64().unwrap_or(f64::INFINITY);
    if norm > max_norm {
        grads.scale(real(max_norm / norm));
    }
    norm
}
