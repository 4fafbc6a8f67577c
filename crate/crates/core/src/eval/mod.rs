//! Holdout splits, confusion-matrix metrics and grid search.

mod grid;
mod metrics;
mod split;

use thiserror::Error;

use crate::models::TrainedModel;
use crate::preprocess::Dataset;

pub use grid::{grid_search, Candidate, CandidateResult, GridResult, GridSpec};
pub use metrics::{confusion, format_optional, metrics, ConfusionMatrix, EvalReport};
pub use split::{holdout_indices, holdout_split, stratified_folds, SplitIndices};

#[derive(Debug, Error, PartialEq)]
pub enum EvalError {
    #[error("need at least {need} rows, have {have}")]
    TooFewRows { need: usize, have: usize },
    #[error("train fraction {0} is not in (0, 1)")]
    BadFraction(f64),
    #[error("length mismatch: {0} vs {1}")]
    LengthMismatch(usize, usize),
    #[error("label {label} is out of range for {n_classes} classes")]
    LabelOutOfRange { label: usize, n_classes: usize },
    #[error("confusion matrix is empty")]
    EmptyMatrix,
    #[error("invalid grid: {0}")]
    InvalidGrid(String),
    #[error("every grid candidate failed; {first}")]
    AllCandidatesFailed { first: String },
    #[error("model: {0}")]
    Model(String),
    #[error("serialization: {0}")]
    Serialization(String),
}

impl From<csv::Error> for EvalError {
    fn from(e: csv::Error) -> Self {
        EvalError::Serialization(e.to_string())
    }
}

/// Predicts `data` with `model` and scores the result.
pub fn evaluate(model: &TrainedModel, data: &Dataset) -> Result<EvalReport, EvalError> {
    let predicted = model.predict(data).map_err(|e| EvalError::Model(e.to_string()))?;
    metrics(&confusion(data.labels(), &predicted, data.n_classes())?)
}
