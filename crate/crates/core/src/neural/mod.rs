//! Bidirectional LSTM sequence tagger used as the NER probe.

pub mod gradcheck;
mod lstm;
pub mod model;
pub mod train;

use thiserror::Error;

pub use gradcheck::{gradient_check, relative_error, CheckResult, CheckScope};
pub use model::{Checkpoint, TaggedSequence, TaggerModel, CHECKPOINT_FORMAT, NUM_LAYERS};
pub use train::{batch_gradient, train_tagger, Adam, Optimizer, TaggerConfig, TrainReport, DEFAULT_CLIP};

#[derive(Debug, Error)]
pub enum NeuralError {
    #[error("invalid tagger config: {0}")]
    Config(String),
    #[error("input dimension {got} does not match model input size {expected}")]
    DimMismatch { expected: usize, got: usize },
    #[error("empty sequence")]
    EmptySequence,
    #[error("training set is empty")]
    EmptyDataset,
    #[error("tag index {0} is outside the tag set")]
    UnknownTag(usize),
    #[error("training diverged to non-finite parameters")]
    Diverged,
    #[error("bad checkpoint: {0}")]
    Checkpoint(String),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}
