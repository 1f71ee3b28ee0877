//! Sequence classifiers: embedding → (Bi)LSTM → dense(relu) → softmax or
//! sigmoid head, with hand-written backpropagation through time.
//!
//! All parameters live in one flat vector; [`SeqClassifier::param_blocks`]
//! names the tensors inside it. Gate order within LSTM weights is
//! `i, f, g, o`.

mod model;
mod train;

pub use model::{init_model, ArchSpec, EmbeddingInit, Head, SeqClassifier, Target};
pub use train::{train, EpochStats, History, TrainConfig};

use thiserror::Error;

use crate::numkit::NumError;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum NeuralError {
    #[error("sequence length {actual} does not match maxlen {expected}")]
    LengthMismatch { expected: usize, actual: usize },
    #[error("token index {index} out of range for vocabulary of {vocab}")]
    IndexOutOfRange { index: usize, vocab: usize },
    #[error("invalid target: {0}")]
    InvalidTarget(String),
    #[error("empty batch")]
    EmptyBatch,
    #[error("empty training set")]
    EmptyTrainingSet,
    #[error("embedding store has dimension {store}, architecture expects {arch}")]
    EmbeddingDim { store: usize, arch: usize },
    #[error("embedding init requires a store but none was given")]
    MissingStore,
    #[error("invalid architecture: {0}")]
    BadArch(String),
    #[error("invalid training config: {0}")]
    BadConfig(String),
    #[error("parameter vector has {actual} values, model needs {expected}")]
    ParamCount { expected: usize, actual: usize },
    #[error(transparent)]
    Num(#[from] NumError),
}
