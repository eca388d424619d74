use rand::seq::index::sample;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::{Graph, NnError, NodeId, ParamStore};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct GradCheckConfig {
    /// Central-difference step.
    pub epsilon: f64,
    /// Lower bound on the denominator of the relative error.
    pub floor: f64,
    pub tolerance: f64,
    /// Coordinates sampled per parameter tensor (all when smaller).
    pub samples_per_param: usize,
    /// Largest tolerated share of sampled coordinates whose perturbation
    /// moves a ReLU input across zero.
    pub max_kink_fraction: f64,
    pub seed: u64,
}

impl Default for GradCheckConfig {
    fn default() -> Self {
        GradCheckConfig {
            epsilon: 1e-5,
            floor: 1e-5,
            tolerance: 1e-4,
            samples_per_param: 4,
            max_kink_fraction: 0.05,
            seed: 0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct GradCheckReport {
    pub checked: usize,
    /// Sampled coordinates left out because a ReLU switched within epsilon.
    pub kinks: usize,
    pub max_relative_error: f64,
    /// `name[index]` of the worst coordinate.
    pub worst: Option<String>,
    pub passed: bool,
}

/// `|a − n| / max(|a|, |n|, floor)`.
pub fn relative_error(analytic: f64, numeric: f64, floor: f64) -> f64 {
    (analytic - numeric).abs() / analytic.abs().max(numeric.abs()).max(floor)
}

fn evaluate(
    store: &ParamStore<f64>,
    loss: &impl Fn(&mut Graph<f64>) -> Result<NodeId, NnError>,
) -> Result<(f64, Vec<bool>), NnError> {
    let mut g = Graph::new(store);
    let out = loss(&mut g)?;
    let value = g.scalar(out);
    if !value.is_finite() {
        return Err(NnError::NonFinite(value));
    }
    Ok((value, g.relu_pattern()))
}

/// Compares backpropagated gradients with central differences on sampled
/// coordinates of every parameter tensor. `loss` must be deterministic.
/// Coordinates whose central difference straddles a ReLU kink are counted
/// in `kinks` instead of compared.
pub fn gradient_check(
    store: &ParamStore<f64>,
    loss: impl Fn(&mut Graph<f64>) -> Result<NodeId, NnError>,
    config: &GradCheckConfig,
) -> Result<GradCheckReport, NnError> {
    let (analytic, pattern) = {
        let mut g = Graph::new(store);
        let out = loss(&mut g)?;
        (g.backward(out), g.relu_pattern())
    };
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let mut perturbed = store.clone();
    let mut report = GradCheckReport {
        checked: 0,
        kinks: 0,
        max_relative_error: 0.0,
        worst: None,
        passed: true,
    };
    for id in store.ids() {
        let len = store.get(id).len();
        let coords: Vec<usize> = if len <= config.samples_per_param {
            (0..len).collect()
        } else {
            sample(&mut rng, len, config.samples_per_param).into_vec()
        };
        for k in coords {
            let original = store.get(id).data[k];
            perturbed.get_mut(id).data[k] = original + config.epsilon;
            let (plus, plus_pattern) = evaluate(&perturbed, &loss)?;
            perturbed.get_mut(id).data[k] = original - config.epsilon;
            let (minus, minus_pattern) = evaluate(&perturbed, &loss)?;
            perturbed.get_mut(id).data[k] = original;
            if plus_pattern != pattern || minus_pattern != pattern {
                report.kinks += 1;
                continue;
            }
            let numeric = (plus - minus) / (2.0 * config.epsilon);
            let err = relative_error(analytic.get(id)[k], numeric, config.floor);
            let err = if err.is_nan() { f64::INFINITY } else { err };
            report.checked += 1;
            if report.worst.is_none() || err > report.max_relative_error {
                report.max_relative_error = err;
                report.worst = Some(format!("{}[{k}]", store.name(id)));
            }
        }
    }
    let sampled = (report.checked + report.kinks) as f64;
    report.passed = report.max_relative_error < config.tolerance
        && report.kinks as f64 <= config.max_kink_fraction * sampled;
    Ok(report)
}
