//! Minimal neural substrate: parameters, a reverse-mode tape, the sentence
//! encoder, feed-forward heads, Adadelta, initialization, gradient checking
//! and checkpoints.
//!
//! Everything is generic over [`Real`] so models train in `f32` and are
//! gradient-checked in `f64`.

mod checkpoint;
mod encoder;
mod gradcheck;
mod graph;
mod init;
mod lstm;
mod mlp;
mod optim;
mod tensor;
mod train;
mod vocab;

use std::fmt::Debug;
use std::iter::Sum;
use std::ops::{AddAssign, MulAssign};

use num_traits::{Float, FromPrimitive, ToPrimitive};

pub use checkpoint::{
    load_checkpoint, read_checkpoint, save_checkpoint, write_checkpoint, Manifest, CHECKPOINT_MAGIC,
};
pub use encoder::{Encoder, EncoderConfig};
pub use gradcheck::{gradient_check, GradCheckConfig, GradCheckReport};
pub use graph::{softmax, Graph, NodeId};
pub use init::{init_glorot, init_normal, init_orthonormal};
pub use lstm::LstmCell;
pub use mlp::{Mlp, MlpConfig};
pub use optim::{clip_global_norm, Adadelta, AdadeltaConfig};
pub use tensor::{Grads, ParamId, ParamStore, Tensor};
pub use train::{train_loop, EpochStats, TrainConfig, TrainReport};
pub use vocab::{load_embeddings, Vocab, UNK};

pub trait Real:
    Float
    + FromPrimitive
    + ToPrimitive
    + Debug
    + Default
    + Send
    + Sync
    + AddAssign
    + MulAssign
    + Sum
    + 'static
{
}

impl Real for f32 {}
impl Real for f64 {}

pub(crate) fn real<T: Real>(x: f64) -> T {
    T::from_f64(x).expect("representable constant")
}

#[derive(Debug, thiserror::Error)]
pub enum NnError {
    #[error("missing parameter {0}")]
    MissingParameter(String),
    #[error("duplicate parameter {0}")]
    DuplicateParameter(String),
    #[error("{context}: expected shape {expected:?}, found {found:?}")]
    Shape {
        context: String,
        expected: Vec<usize>,
        found: Vec<usize>,
    },
    #[error("non-finite loss {0}")]
    NonFinite(f64),
    #[error("checkpoint: {0}")]
    Checkpoint(String),
    #[error("no training examples")]
    EmptyTrainingSet,
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub(crate) fn shape_error(
    context: impl Into<String>,
    expected: &[usize],
    found: &[usize],
) -> NnError {
    NnError::Shape {
        context: context.into(),
        expected: expected.to_vec(),
        found: found.to_vec(),
    }
}
