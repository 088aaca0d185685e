//! Evaluation metrics and the cross-validation experiment driver
//! reproducing the five-model grid.

mod experiment;

pub use experiment::{
    render_table, run_experiment, ExperimentArtifacts, ExperimentReport, GridConfig, ModelKind,
    TaskKind,
};

use thiserror::Error;

use crate::corpus::Label;

#[derive(Debug, Error)]
pub enum EvalError {
    #[error("empty input")]
    EmptyInput,
    #[error("{0} predictions but {1} labels")]
    LengthMismatch(usize, usize),
    #[error("missing artifact: {what} ({hint})")]
    MissingArtifact { what: String, hint: String },
    #[error("corpus for {0} has no labels; run median_split (train-eval does this automatically)")]
    Unlabeled(String),
    #[error("unknown model name {0:?}")]
    UnknownModel(String),
    #[error(transparent)]
    Corpus(#[from] crate::corpus::CorpusError),
    #[error(transparent)]
    Model(#[from] crate::models::ModelError),
    #[error("io error: {0}")]
    Io(#[from] std::io::Error),
    #[error("report serialization error: {0}")]
    Json(#[from] serde_json::Error),
}

/// Confusion counts for binary predictions.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct Confusion {
    pub true_positive: usize,
    pub false_positive: usize,
    pub false_negative: usize,
    pub true_negative: usize,
}

impl Confusion {
    pub fn from_labels(predictions: &[Label], truth: &[Label]) -> Result<Self, EvalError> {
        if predictions.is_empty() {
            return Err(EvalError::EmptyInput);
        }
        if predictions.len() != truth.len() {
            return Err(EvalError::LengthMismatch(predictions.len(), truth.len()));
        }
        let mut c = Confusion::default();
        for (p, t) in predictions.iter().zip(truth) {
            match (p.is_positive(), t.is_positive()) {
                (true, true) => c.true_positive += 1,
                (true, false) => c.false_positive += 1,
                (false, true) => c.false_negative += 1,
                (false, false) => c.true_negative += 1,
            }
        }
        Ok(c)
    }

    pub fn precision(&self) -> Option<f64> {
        let denom = self.true_positive + self.false_positive;
        (denom > 0).then(|| self.true_positive as f64 / denom as f64)
    }

    pub fn recall(&self) -> Option<f64> {
        let denom = self.true_positive + self.false_negative;
        (denom > 0).then(|| self.true_positive as f64 / denom as f64)
    }

    /// Positive-class F1, with the zero-denominator convention: an
    /// undefined precision or recall (or a zero P+R sum) yields 0.
    pub fn f1(&self) -> f64 {
        match (self.precision(), self.recall()) {
            (Some(p), Some(r)) if p + r > 0.0 => 2.0 * p * r / (p + r),
            _ => {
                log::warn!("degenerate F1 (no predicted or no true positives); reporting 0");
                0.0
            }
        }
    }

    /// True when the F1 fell back to the zero convention.
    pub fn is_degenerate(&self) -> bool {
        self.precision().is_none() || self.recall().is_none() || self.true_positive == 0
    }
}

/// Positive-class F1 of predictions against ground-truth labels.
pub fn f1_score(predictions: &[Label], truth: &[Label]) -> Result<f64, EvalError> {
    Ok(Confusion::from_labels(predictions, truth)?.f1())
}

/// Root mean squared error over per-user scores.
pub fn rmse(predicted: &[f64], truth: &[f64]) -> Result<f64, EvalError> {
    if predicted.is_empty() {
        return Err(EvalError::EmptyInput);
    }
    if predicted.len() != truth.len() {
        return Err(EvalError::LengthMismatch(predicted.len(), truth.len()));
    }
    let total: f64 = predicted
        .iter()
        .zip(truth)
        .map(|(&p, &t)| (t - p) * (t - p))
        .sum();
    Ok((total / predicted.len() as f64).sqrt())
}
