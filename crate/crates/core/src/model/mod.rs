//! The trainable adviser: an MLP over instance features with a joint
//! keypoint head, class-masked objectives and SGD training.

mod checkpoint;
mod loss;
mod mlp;
mod train;

use thiserror::Error;

use crate::labels::LabelError;

pub use checkpoint::Checkpoint;
pub use loss::{
    batch_loss, class_masked_probabilities, example_loss, examples_from_records, gradients,
    loss_and_logit_gradient, masked_mse, Example, LossKind, Mode, Objective, Target,
};
pub use mlp::{AdviserNet, Dense, Gradients};
pub use train::{train, train_from, Sgd, TrainConfig, TrainOutcome};

#[derive(Debug, Error)]
pub enum ModelError {
    #[error("feature dimension mismatch: expected {expected}, got {got}")]
    Dimension { expected: usize, got: usize },
    #[error("invalid architecture: {0}")]
    Architecture(String),
    #[error("mode/target mismatch: {0}")]
    ModeMismatch(String),
    #[error("training diverged in epoch {epoch}")]
    Diverged { epoch: usize },
    #[error("empty dataset")]
    EmptyDataset,
    #[error("record {0} has no features")]
    MissingFeatures(String),
    #[error("invalid training configuration: {0}")]
    Config(String),
    #[error("bad checkpoint: {0}")]
    Checkpoint(String),
    #[error(transparent)]
    Label(#[from] LabelError),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}
