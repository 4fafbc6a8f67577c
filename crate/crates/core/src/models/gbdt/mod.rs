//! Multiclass gradient-boosted decision trees on the softmax log-loss.
//!
//! Every round fits one regression tree per class to the first and second
//! derivatives of the log-loss at the current scores. Exact mode considers
//! every midpoint between consecutive distinct training values; histogram
//! mode first merges values into at most `n_bins` quantile buckets.

mod binning;
mod tree;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::preprocess::Dataset;

pub use tree::{Tree, TreeNode};
use tree::{grow_tree, BinnedMatrix, TreeParams};

use super::{argmax, softmax, ModelError};

/// Floor applied to class priors before taking logs for the base score.
pub const PRIOR_FLOOR: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "mode", rename_all = "snake_case", deny_unknown_fields)]
pub enum SplitMode {
    Exact,
    Histogram {
        #[serde(default = "default_n_bins")]
        n_bins: usize,
    },
}

fn default_n_bins() -> usize {
    255
}

impl SplitMode {
    pub fn histogram() -> Self {
        SplitMode::Histogram {
            n_bins: default_n_bins(),
        }
    }

    fn max_bins(self) -> Option<usize> {
        match self {
            SplitMode::Exact => None,
            SplitMode::Histogram { n_bins } => Some(n_bins),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GbdtConfig {
    pub n_classes: usize,
    pub learning_rate: f64,
    pub max_depth: usize,
    pub n_rounds: usize,
    pub l2_leaf_reg: f64,
    pub min_child_weight: f64,
    /// Smallest gain a split must exceed.
    pub min_split_gain: f64,
    pub split_mode: SplitMode,
}

impl Default for GbdtConfig {
    fn default() -> Self {
        Self {
            n_classes: 3,
            learning_rate: 0.3,
            max_depth: 9,
            n_rounds: 100,
            l2_leaf_reg: 1.0,
            min_child_weight: 1.0,
            min_split_gain: 0.0,
            split_mode: SplitMode::Exact,
        }
    }
}

impl GbdtConfig {
    pub fn validate(&self) -> Result<(), ModelError> {
        let bad = |msg: String| Err(ModelError::InvalidConfig(msg));
        if self.n_classes < 2 {
            return bad(format!("n_classes must be at least 2, got {}", self.n_classes));
        }
        if !(self.learning_rate > 0.0 && self.learning_rate <= 1.0) {
            return bad(format!("learning_rate must be in (0, 1], got {}", self.learning_rate));
        }
        if self.max_depth < 1 {
            return bad("max_depth must be at least 1".into());
        }
        if self.n_rounds < 1 {
            return bad("n_rounds must be at least 1".into());
        }
        if !(self.l2_leaf_reg >= 0.0 && self.l2_leaf_reg.is_finite()) {
            return bad(format!("l2_leaf_reg must be finite and >= 0, got {}", self.l2_leaf_reg));
        }
        if !(self.min_child_weight >= 0.0 && self.min_child_weight.is_finite()) {
            return bad(format!(
                "min_child_weight must be finite and >= 0, got {}",
                self.min_child_weight
            ));
        }
        if !(self.min_split_gain >= 0.0 && self.min_split_gain.is_finite()) {
            return bad(format!(
                "min_split_gain must be finite and >= 0, got {}",
                self.min_split_gain
            ));
        }
        if let SplitMode::Histogram { n_bins } = self.split_mode {
            if n_bins < 2 {
                return bad(format!("n_bins must be at least 2, got {n_bins}"));
            }
        }
        Ok(())
    }
}

/// What happened during fitting.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FitReport {
    /// Mean training log-loss before the first round and after each round.
    pub train_log_loss: Vec<f64>,
    /// All rows share identical features while labels are mixed, so no split
    /// exists and the model is constant.
    pub degenerate_data: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GbdtModel {
    config: GbdtConfig,
    n_features: usize,
    base_scores: Vec<f64>,
    /// `rounds[r][k]` is the tree for class `k` in round `r`.
    rounds: Vec<Vec<Tree>>,
    report: FitReport,
}

/// Gradient and diagonal hessian of `-ln softmax(logits)[label]`.
pub fn softmax_grad_hess(logits: &[f64], label: usize) -> (Vec<f64>, Vec<f64>) {
    let p = softmax(logits);
    let grad = p
        .iter()
        .enumerate()
        .map(|(k, &pk)| pk - if k == label { 1.0 } else { 0.0 })
        .collect();
    let hess = p.iter().map(|&pk| pk * (1.0 - pk)).collect();
    (grad, hess)
}

/// `-ln softmax(logits)[label]`, computed without forming probabilities.
pub fn softmax_log_loss(logits: &[f64], label: usize) -> f64 {
    let max = logits.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let lse = max + logits.iter().map(|&z| (z - max).exp()).sum::<f64>().ln();
    lse - logits[label]
}

fn mean_log_loss(scores: &[f64], labels: &[usize], k: usize) -> f64 {
    let total: f64 = labels
        .iter()
        .enumerate()
        .map(|(i, &y)| softmax_log_loss(&scores[i * k..(i + 1) * k], y))
        .sum();
    total / labels.len() as f64
}

impl GbdtModel {
    pub fn fit(train: &Dataset, config: &GbdtConfig) -> Result<Self, ModelError> {
        config.validate()?;
        let n = train.n_rows();
        let k = config.n_classes;
        if n < 2 {
            return Err(ModelError::TooFewRows { need: 2, have: n });
        }
        let labels = train.labels();
        if let Some(&bad) = labels.iter().find(|&&y| y >= k) {
            return Err(ModelError::LabelOutOfRange {
                label: bad,
                n_classes: k,
            });
        }

        let mut counts = vec![0usize; k];
        for &y in labels {
            counts[y] += 1;
        }
        let base_scores: Vec<f64> = counts
            .iter()
            .map(|&c| (c as f64 / n as f64).max(PRIOR_FLOOR).ln())
            .collect();

        let matrix = BinnedMatrix::new(
            train.values(),
            n,
            train.n_features(),
            config.split_mode.max_bins(),
        );
        let degenerate_data = matrix.is_constant() && counts.iter().filter(|&&c| c > 0).count() > 1;
        let params = TreeParams {
            max_depth: config.max_depth,
            l2: config.l2_leaf_reg,
            min_child_weight: config.min_child_weight,
            min_split_gain: config.min_split_gain,
            learning_rate: config.learning_rate,
        };

        let mut scores: Vec<f64> = (0..n).flat_map(|_| base_scores.iter().copied()).collect();
        let mut train_log_loss = vec![mean_log_loss(&scores, labels, k)];
        let mut rounds = Vec::with_capacity(config.n_rounds);
        let mut grad = vec![vec![0.0; n]; k];
        let mut hess = vec![vec![0.0; n]; k];

        for _ in 0..config.n_rounds {
            for (i, &y) in labels.iter().enumerate() {
                let (g, h) = softmax_grad_hess(&scores[i * k..(i + 1) * k], y);
                for c in 0..k {
                    grad[c][i] = g[c];
                    hess[c][i] = h[c];
                }
            }
            let grown: Vec<(Tree, Vec<f64>)> = (0..k)
                .into_par_iter()
                .map(|c| grow_tree(&matrix, &grad[c], &hess[c], params))
                .collect();
            let mut trees = Vec::with_capacity(k);
            for (c, (tree, increments)) in grown.into_iter().enumerate() {
                for (i, inc) in increments.into_iter().enumerate() {
                    scores[i * k + c] += inc;
                }
                trees.push(tree);
            }
            rounds.push(trees);
            train_log_loss.push(mean_log_loss(&scores, labels, k));
        }

        Ok(GbdtModel {
            config: config.clone(),
            n_features: train.n_features(),
            base_scores,
            rounds,
            report: FitReport {
                train_log_loss,
                degenerate_data,
            },
        })
    }

    pub fn config(&self) -> &GbdtConfig {
        &self.config
    }

    pub fn n_classes(&self) -> usize {
        self.config.n_classes
    }

    pub fn n_features(&self) -> usize {
        self.n_features
    }

    pub fn base_scores(&self) -> &[f64] {
        &self.base_scores
    }

    pub fn rounds(&self) -> &[Vec<Tree>] {
        &self.rounds
    }

    pub fn fit_report(&self) -> &FitReport {
        &self.report
    }

    /// The same model keeping only its first `n_rounds` rounds.
    pub fn truncated(&self, n_rounds: usize) -> Self {
        let mut model = self.clone();
        model.rounds.truncate(n_rounds);
        model.report.train_log_loss.truncate(model.rounds.len() + 1);
        model
    }

    /// Raw per-class scores: base score plus every tree's output.
    pub fn decision_function(&self, row: &[f64]) -> Vec<f64> {
        let mut scores = self.base_scores.clone();
        for trees in &self.rounds {
            for (s, tree) in scores.iter_mut().zip(trees) {
                *s += tree.predict(row);
            }
        }
        scores
    }

    pub fn predict_proba_row(&self, row: &[f64]) -> Vec<f64> {
        softmax(&self.decision_function(row))
    }

    pub fn predict_row(&self, row: &[f64]) -> usize {
        argmax(&self.predict_proba_row(row))
    }
}
