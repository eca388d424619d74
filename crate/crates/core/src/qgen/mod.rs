//! Question generation from a span: a local model predicting each slot
//! independently and a sequential model decoding slots left to right.

mod model;

pub use model::{
    grammar_slot_sizes, Generated, LocalNet, QgenConfig, QgenKind, QuestionGenerator, SeqNet,
    SlotHeads,
};

use crate::corpus::AnswerSpan;
use crate::nn::NnError;

#[derive(Debug, thiserror::Error)]
pub enum QgenError {
    #[error("span {span} outside a sentence of {len} tokens")]
    SpanOutOfBounds { span: AnswerSpan, len: usize },
    #[error("gold question uses a value outside the slot vocabulary")]
    UnknownValue,
    #[error("slot vocabulary sizes {found:?} differ from the grammar's {expected:?}")]
    VocabularyMismatch {
        expected: [usize; 7],
        found: [usize; 7],
    },
    #[error("checkpoint holds a {0} model, not a question generator")]
    WrongKind(String),
    #[error(transparent)]
    Nn(#[from] NnError),
}

/// One probability distribution per slot, in template order.
pub type SlotDistributions = Vec<Vec<f64>>;
