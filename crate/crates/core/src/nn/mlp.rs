use rand::Rng;
use serde::{Deserialize, Serialize};

use super::{init_glorot, shape_error, Graph, NnError, NodeId, ParamId, ParamStore, Real, Tensor};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct MlpConfig {
    pub input: usize,
    pub hidden: usize,
    pub output: usize,
}

/// One rectified hidden layer followed by an affine output layer.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Mlp {
    pub config: MlpConfig,
    pub w1: ParamId,
    pub b1: ParamId,
    pub w2: ParamId,
    pub b2: ParamId,
}

impl Mlp {
    pub fn build<T: Real>(
        store: &mut ParamStore<T>,
        prefix: &str,
        config: MlpConfig,
        rng: &mut impl Rng,
    ) -> Result<Self, NnError> {
        Ok(Mlp {
            config,
            w1: store.add(
                format!("{prefix}.w1"),
                init_glorot(config.hidden, config.input, rng),
            )?,
            b1: store.add(format!("{prefix}.b1"), Tensor::zeros(&[config.hidden]))?,
            w2: store.add(
                format!("{prefix}.w2"),
                init_glorot(config.output, config.hidden, rng),
            )?,
            b2: store.add(format!("{prefix}.b2"), Tensor::zeros(&[config.output]))?,
        })
    }

    pub fn bind<T: Real>(
        store: &ParamStore<T>,
        prefix: &str,
        config: MlpConfig,
    ) -> Result<Self, NnError> {
        Ok(Mlp {
            config,
            w1: store.expect(&format!("{prefix}.w1"), &[config.hidden, config.input])?,
            b1: store.expect(&format!("{prefix}.b1"), &[config.hidden])?,
            w2: store.expect(&format!("{prefix}.w2"), &[config.output, config.hidden])?,
            b2: store.expect(&format!("{prefix}.b2"), &[config.output])?,
        })
    }

    pub fn forward<T: Real>(&self, g: &mut Graph<T>, x: NodeId) -> Result<NodeId, NnError> {
        let found = g.value(x).len();
        if found != self.config.input {
            return Err(shape_error("mlp input", &[self.config.input], &[found]));
        }
        let pre = g.affine(self.w1, x, Some(self.b1));
        let hidden = g.relu(pre);
        Ok(g.affine(self.w2, hidden, Some(self.b2)))
    }
}
