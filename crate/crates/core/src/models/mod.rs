//! Classifiers: k-nearest neighbors, Gaussian naive Bayes and gradient
//! boosted trees, plus a versioned JSON model file.

pub mod gbdt;
pub mod gnb;
pub mod kdtree;
pub mod knn;

use std::fs;
use std::io;
use std::path::Path;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::preprocess::Dataset;

pub use gbdt::{softmax_grad_hess, softmax_log_loss, FitReport, GbdtConfig, GbdtModel, SplitMode};
pub use gnb::{GnbConfig, GnbModel};
pub use knn::{KnnConfig, KnnModel};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ModelError {
    #[error("training set is empty")]
    EmptyDataset,
    #[error("need at least {need} rows, have {have}")]
    TooFewRows { need: usize, have: usize },
    #[error("class {0} has no training rows")]
    EmptyClass(usize),
    #[error("label {label} is out of range for {n_classes} classes")]
    LabelOutOfRange { label: usize, n_classes: usize },
    #[error("schema mismatch: expected {expected:?}, got {got:?}")]
    SchemaMismatch {
        expected: Vec<String>,
        got: Vec<String>,
    },
    #[error("invalid config: {0}")]
    InvalidConfig(String),
    #[error("model file: {0}")]
    Serialization(String),
}

/// Index of the largest value. Ties go to the smallest index.
pub fn argmax(values: &[f64]) -> usize {
    let mut best = 0;
    for (i, &v) in values.iter().enumerate().skip(1) {
        if v > values[best] {
            best = i;
        }
    }
    best
}

/// Numerically stable softmax.
pub fn softmax(logits: &[f64]) -> Vec<f64> {
    let max = logits.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let exp: Vec<f64> = logits.iter().map(|&z| (z - max).exp()).collect();
    let sum: f64 = exp.iter().sum();
    exp.into_iter().map(|e| e / sum).collect()
}

/// Which classifier to train and with what settings.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ModelConfig {
    Knn(KnnConfig),
    Gnb(GnbConfig),
    Gbdt(GbdtConfig),
}

impl ModelConfig {
    pub fn name(&self) -> &'static str {
        match self {
            ModelConfig::Knn(_) => "knn",
            ModelConfig::Gnb(_) => "gnb",
            ModelConfig::Gbdt(_) => "gbdt",
        }
    }

    pub fn fit(&self, train: &Dataset) -> Result<TrainedModel, ModelError> {
        let model = match self {
            ModelConfig::Knn(c) => TrainedModel::Knn(KnnModel::fit(train, c)?),
            ModelConfig::Gnb(c) => TrainedModel::Gnb(GnbModel::fit(train, c)?),
            ModelConfig::Gbdt(c) => TrainedModel::Gbdt(GbdtModel::fit(train, c)?),
        };
        Ok(model)
    }
}

/// A fitted classifier. Immutable and safe to share across threads.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum TrainedModel {
    Knn(KnnModel),
    Gnb(GnbModel),
    Gbdt(GbdtModel),
}

impl TrainedModel {
    pub fn name(&self) -> &'static str {
        match self {
            TrainedModel::Knn(_) => "knn",
            TrainedModel::Gnb(_) => "gnb",
            TrainedModel::Gbdt(_) => "gbdt",
        }
    }

    pub fn n_classes(&self) -> usize {
        match self {
            TrainedModel::Knn(m) => m.n_classes(),
            TrainedModel::Gnb(m) => m.n_classes(),
            TrainedModel::Gbdt(m) => m.n_classes(),
        }
    }

    pub fn n_features(&self) -> usize {
        match self {
            TrainedModel::Knn(m) => m.n_features(),
            TrainedModel::Gnb(m) => m.n_features(),
            TrainedModel::Gbdt(m) => m.n_features(),
        }
    }

    pub fn predict_proba_row(&self, row: &[f64]) -> Vec<f64> {
        match self {
            TrainedModel::Knn(m) => m.predict_proba_row(row),
            TrainedModel::Gnb(m) => m.predict_proba_row(row),
            TrainedModel::Gbdt(m) => m.predict_proba_row(row),
        }
    }

    pub fn predict_row(&self, row: &[f64]) -> usize {
        match self {
            TrainedModel::Knn(m) => m.predict_row(row),
            TrainedModel::Gnb(m) => m.predict_row(row),
            TrainedModel::Gbdt(m) => m.predict_row(row),
        }
    }

    fn check_width(&self, data: &Dataset) -> Result<(), ModelError> {
        if data.n_features() != self.n_features() {
            return Err(ModelError::SchemaMismatch {
                expected: vec![format!("{} features", self.n_features())],
                got: data.schema().to_vec(),
            });
        }
        Ok(())
    }

    pub fn predict_proba(&self, data: &Dataset) -> Result<Vec<Vec<f64>>, ModelError> {
        self.check_width(data)?;
        Ok((0..data.n_rows())
            .into_par_iter()
            .map(|i| self.predict_proba_row(data.row(i)))
            .collect())
    }

    pub fn predict(&self, data: &Dataset) -> Result<Vec<usize>, ModelError> {
        self.check_width(data)?;
        Ok((0..data.n_rows())
            .into_par_iter()
            .map(|i| self.predict_row(data.row(i)))
            .collect())
    }
}

pub const MODEL_FORMAT: &str = "scint-model";
pub const MODEL_FORMAT_VERSION: u32 = 1;

/// On-disk model: a fitted classifier with the feature schema it expects
/// and the hash of the configuration that produced it.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelFile {
    pub format: String,
    pub version: u32,
    pub config_hash: String,
    pub schema: Vec<String>,
    pub model: TrainedModel,
}

impl ModelFile {
    pub fn new(model: TrainedModel, schema: Vec<String>, config_hash: impl Into<String>) -> Self {
        Self {
            format: MODEL_FORMAT.to_string(),
            version: MODEL_FORMAT_VERSION,
            config_hash: config_hash.into(),
            schema,
            model,
        }
    }

    pub fn to_json(&self) -> Result<String, ModelError> {
        serde_json::to_string(self).map_err(|e| ModelError::Serialization(e.to_string()))
    }

    pub fn from_json(text: &str) -> Result<Self, ModelError> {
        let file: ModelFile =
            serde_json::from_str(text).map_err(|e| ModelError::Serialization(e.to_string()))?;
        if file.format != MODEL_FORMAT || file.version != MODEL_FORMAT_VERSION {
            return Err(ModelError::Serialization(format!(
                "unsupported model file {} v{}",
                file.format, file.version
            )));
        }
        if file.schema.len() != file.model.n_features() {
            return Err(ModelError::Serialization(format!(
                "schema lists {} features, model expects {}",
                file.schema.len(),
                file.model.n_features()
            )));
        }
        Ok(file)
    }

    pub fn save(&self, path: &Path) -> io::Result<()> {
        let text = self.to_json().map_err(io::Error::other)?;
        fs::write(path, text)
    }

    pub fn load(path: &Path) -> io::Result<Self> {
        let text = fs::read_to_string(path)?;
        Self::from_json(&text).map_err(|e| io::Error::new(io::ErrorKind::InvalidData, e))
    }

    /// Fails unless `data` has exactly this model's feature columns.
    pub fn check_schema(&self, data: &Dataset) -> Result<(), ModelError> {
        if data.schema() != self.schema.as_slice() {
            return Err(ModelError::SchemaMismatch {
                expected: self.schema.clone(),
                got: data.schema().to_vec(),
            });
        }
        Ok(())
    }

    pub fn predict_proba(&self, data: &Dataset) -> Result<Vec<Vec<f64>>, ModelError> {
        self.check_schema(data)?;
        self.model.predict_proba(data)
    }

    pub fn predict(&self, data: &Dataset) -> Result<Vec<usize>, ModelError> {
        self.check_schema(data)?;
        self.model.predict(data)
    }
}
