//! Gaussian naive Bayes evaluated in log space.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::preprocess::Dataset;

use super::{argmax, softmax, ModelError};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GnbConfig {
    /// Added to every per-class feature variance.
    pub variance_smoothing: f64,
}

impl Default for GnbConfig {
    fn default() -> Self {
        Self {
            variance_smoothing: 1e-9,
        }
    }
}

impl GnbConfig {
    pub fn validate(&self) -> Result<(), ModelError> {
        if !(self.variance_smoothing > 0.0 && self.variance_smoothing.is_finite()) {
            return Err(ModelError::InvalidConfig(format!(
                "variance_smoothing must be positive, got {}",
                self.variance_smoothing
            )));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GnbModel {
    n_classes: usize,
    n_features: usize,
    log_priors: Vec<f64>,
    /// Class-major `n_classes x n_features`.
    means: Vec<f64>,
    variances: Vec<f64>,
}

impl GnbModel {
    pub fn fit(train: &Dataset, config: &GnbConfig) -> Result<Self, ModelError> {
        config.validate()?;
        if train.is_empty() {
            return Err(ModelError::EmptyDataset);
        }
        let k = train.n_classes();
        let d = train.n_features();
        let counts = train.class_counts();
        if let Some(c) = counts.iter().position(|&c| c == 0) {
            return Err(ModelError::EmptyClass(c));
        }
        let mut means = vec![0.0; k * d];
        for (row, &l) in train.rows().zip(train.labels()) {
            for (m, v) in means[l * d..(l + 1) * d].iter_mut().zip(row) {
                *m += v;
            }
        }
        for c in 0..k {
            means[c * d..(c + 1) * d]
                .iter_mut()
                .for_each(|m| *m /= counts[c] as f64);
        }
        let mut variances = vec![0.0; k * d];
        for (row, &l) in train.rows().zip(train.labels()) {
            for j in 0..d {
                let diff = row[j] - means[l * d + j];
                variances[l * d + j] += diff * diff;
            }
        }
        for c in 0..k {
            variances[c * d..(c + 1) * d]
                .iter_mut()
                .for_each(|v| *v = *v / counts[c] as f64 + config.variance_smoothing);
        }
        let n = train.n_rows() as f64;
        Ok(GnbModel {
            n_classes: k,
            n_features: d,
            log_priors: counts.iter().map(|&c| (c as f64 / n).ln()).collect(),
            means,
            variances,
        })
    }

    pub fn n_classes(&self) -> usize {
        self.n_classes
    }

    pub fn n_features(&self) -> usize {
        self.n_features
    }

    pub fn log_priors(&self) -> &[f64] {
        &self.log_priors
    }

    pub fn mean(&self, class: usize, feature: usize) -> f64 {
        self.means[class * self.n_features + feature]
    }

    pub fn variance(&self, class: usize, feature: usize) -> f64 {
        self.variances[class * self.n_features + feature]
    }

    /// Adds `shift` to every log prior.
    pub fn shift_log_priors(&mut self, shift: f64) {
        self.log_priors.iter_mut().for_each(|p| *p += shift);
    }

    /// Unnormalized log posterior per class.
    pub fn joint_log_likelihood(&self, row: &[f64]) -> Vec<f64> {
        let d = self.n_features;
        (0..self.n_classes)
            .map(|c| {
                let mut s = self.log_priors[c];
                for (j, x) in row.iter().enumerate() {
                    let var = self.variances[c * d + j];
                    let diff = x - self.means[c * d + j];
                    s -= 0.5 * (2.0 * PI * var).ln() + diff * diff / (2.0 * var);
                }
                s
            })
            .collect()
    }

    pub fn predict_proba_row(&self, row: &[f64]) -> Vec<f64> {
        softmax(&self.joint_log_likelihood(row))
    }

    pub fn predict_row(&self, row: &[f64]) -> usize {
        argmax(&self.joint_log_likelihood(row))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn ds(rows: &[Vec<f64>], labels: Vec<usize>, k: usize) -> Dataset {
        let schema = (0..rows[0].len()).map(|i| format!("f{i}")).collect();
        Dataset::from_rows(schema, rows, labels, k).unwrap()
    }

    #[test]
    fn symmetric_classes_split_evenly() {
        let train = ds(
            &[vec![-2.0], vec![-1.0], vec![1.0], vec![2.0]],
            vec![0, 0, 1, 1],
            2,
        );
        let m = GnbModel::fit(&train, &GnbConfig::default()).unwrap();
        let p = m.predict_proba_row(&[0.0]);
        assert!((p[0] - 0.5).abs() < 1e-12 && (p[1] - 0.5).abs() < 1e-12, "{p:?}");
    }

    #[test]
    fn tight_class_dominates_at_its_mean() {
        let train = ds(
            &[vec![0.0], vec![0.0], vec![1.0], vec![1.0], vec![2.0], vec![2.0]],
            vec![0, 0, 1, 1, 2, 2],
            3,
        );
        let m = GnbModel::fit(&train, &GnbConfig::default()).unwrap();
        let p = m.predict_proba_row(&[1.0]);
        assert!(p[1] > 1.0 - 1e-12, "{p:?}");
    }

    #[test]
    fn missing_class_is_an_error() {
        let train = ds(&[vec![0.0], vec![1.0]], vec![0, 0], 2);
        assert!(matches!(
            GnbModel::fit(&train, &GnbConfig::default()),
            Err(ModelError::EmptyClass(1))
        ));
    }

    #[test]
    fn prior_shift_keeps_argmax() {
        let train = ds(
            &[vec![0.0, 1.0], vec![0.5, 0.7], vec![2.0, -1.0], vec![2.5, -0.4], vec![5.0, 0.0], vec![4.0, 0.3]],
            vec![0, 0, 1, 1, 2, 2],
            3,
        );
        let m = GnbModel::fit(&train, &GnbConfig { variance_smoothing: 1e-3 }).unwrap();
        let mut shifted = m.clone();
        shifted.shift_log_priors(3.7_f64.ln());
        for x in [-1.0, 0.3, 1.2, 2.2, 3.3, 4.4, 6.0] {
            let row = [x, 0.1];
            assert_eq!(m.predict_row(&row), shifted.predict_row(&row));
        }
    }
}
