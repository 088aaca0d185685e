//! Trainable classifiers and regressors with exact manually-derived
//! gradients: averaged-embedding logistic regression and the two-channel
//! text CNN, optimized with Adam under binary cross entropy or MSE.

mod adam;
mod cnn;
mod logistic;
mod vectorize;

pub use adam::Adam;
pub use cnn::{CnnConfig, CnnGradients, CnnModel, DocExample, HeadKind};
pub use logistic::{LinearModel, LogisticModel};
pub use vectorize::{FeatureVectorizer, VectorMode, VectorSpace};

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum ModelError {
    #[error("training set is empty")]
    EmptyTrainingSet,
    #[error("training set contains a single class")]
    SingleClass,
    #[error("{0} feature rows but {1} labels")]
    LengthMismatch(usize, usize),
    #[error("non-finite loss at epoch {epoch}")]
    NonFiniteLoss { epoch: usize },
    #[error("non-finite gradient in parameter {0}")]
    NonFiniteGradient(String),
    #[error("vector space has no tables")]
    EmptySpace,
    #[error("vector space tables disagree on dimension")]
    SpaceDimMismatch,
    #[error("t_max must be at least the largest window (5), got {0}")]
    TMaxTooSmall(usize),
    #[error("checkpoint does not match the model architecture: {0}")]
    CheckpointMismatch(String),
    #[error("io error: {0}")]
    Io(#[from] std::io::Error),
    #[error("checkpoint parse error: {0}")]
    Json(#[from] serde_json::Error),
    #[error(transparent)]
    Align(#[from] crate::align::AlignError),
    #[error(transparent)]
    Embedding(#[from] crate::embeddings::EmbeddingError),
}

/// Training objective.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LossKind {
    Bce,
    Mse,
}

/// Fixed-epoch Adam training settings shared by both model families.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct TrainConfig {
    pub epochs: usize,
    pub batch_size: usize,
    pub learning_rate: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub epsilon: f64,
    pub loss: LossKind,
    pub seed: u64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            epochs: 100,
            batch_size: 10,
            learning_rate: 1e-4,
            beta1: 0.9,
            beta2: 0.999,
            epsilon: 1e-8,
            loss: LossKind::Bce,
            seed: 0,
        }
    }
}

pub(crate) fn clamp_prob(p: f64) -> f64 {
    p.clamp(1e-9, 1.0 - 1e-9)
}

/// Standalone loss: BCE with clamped probabilities or plain MSE.
pub fn loss(kind: LossKind, predictions: &[f64], targets: &[f64]) -> f64 {
    assert_eq!(predictions.len(), targets.len(), "length mismatch");
    let n = predictions.len() as f64;
    match kind {
        LossKind::Bce => {
            predictions
                .iter()
                .zip(targets)
                .map(|(&p, &y)| {
                    let p = clamp_prob(p);
                    -(y * p.ln() + (1.0 - y) * (1.0 - p).ln())
                })
                .sum::<f64>()
                / n
        }
        LossKind::Mse => {
            predictions
                .iter()
                .zip(targets)
                .map(|(&p, &y)| (y - p) * (y - p))
                .sum::<f64>()
                / n
        }
    }
}
