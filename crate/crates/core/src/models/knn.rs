//! k-nearest-neighbor classifier over z-scored features.

use serde::{Deserialize, Serialize};

use crate::preprocess::Dataset;

use super::kdtree::{KdTree, Neighbor};
use super::{argmax, ModelError};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct KnnConfig {
    pub n_neighbors: usize,
    pub minkowski_p: f64,
    /// Maximum points per k-d tree leaf. Affects speed only.
    pub leaf_size: usize,
}

impl Default for KnnConfig {
    fn default() -> Self {
        Self {
            n_neighbors: 12,
            minkowski_p: 1.0,
            leaf_size: 1,
        }
    }
}

impl KnnConfig {
    pub fn validate(&self) -> Result<(), ModelError> {
        if self.n_neighbors < 1 {
            return Err(ModelError::InvalidConfig("n_neighbors must be at least 1".into()));
        }
        if !(self.minkowski_p >= 1.0 && self.minkowski_p.is_finite()) {
            return Err(ModelError::InvalidConfig(format!(
                "minkowski_p must be a finite value >= 1, got {}",
                self.minkowski_p
            )));
        }
        if self.leaf_size < 1 {
            return Err(ModelError::InvalidConfig("leaf_size must be at least 1".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KnnModel {
    config: KnnConfig,
    n_classes: usize,
    n_features: usize,
    means: Vec<f64>,
    scales: Vec<f64>,
    /// Standardized training rows, row-major.
    points: Vec<f64>,
    labels: Vec<usize>,
    tree: KdTree,
}

impl KnnModel {
    pub fn fit(train: &Dataset, config: &KnnConfig) -> Result<Self, ModelError> {
        config.validate()?;
        let n = train.n_rows();
        if n == 0 {
            return Err(ModelError::EmptyDataset);
        }
        if config.n_neighbors > n {
            return Err(ModelError::TooFewRows {
                need: config.n_neighbors,
                have: n,
            });
        }
        let d = train.n_features();
        let mut means = vec![0.0; d];
        for row in train.rows() {
            for (m, v) in means.iter_mut().zip(row) {
                *m += v;
            }
        }
        means.iter_mut().for_each(|m| *m /= n as f64);
        let mut scales = vec![0.0; d];
        for row in train.rows() {
            for ((s, v), m) in scales.iter_mut().zip(row).zip(&means) {
                *s += (v - m) * (v - m);
            }
        }
        for s in &mut scales {
            *s = (*s / n as f64).sqrt();
            if *s == 0.0 || !s.is_finite() {
                *s = 1.0;
            }
        }
        let mut model = KnnModel {
            config: config.clone(),
            n_classes: train.n_classes(),
            n_features: d,
            means,
            scales,
            points: Vec::with_capacity(n * d),
            labels: train.labels().to_vec(),
            tree: KdTree::build(&[], d, 1),
        };
        let points: Vec<f64> = train.rows().flat_map(|r| model.standardize(r)).collect();
        model.tree = KdTree::build(&points, d, config.leaf_size);
        model.points = points;
        Ok(model)
    }

    pub fn config(&self) -> &KnnConfig {
        &self.config
    }

    pub fn n_classes(&self) -> usize {
        self.n_classes
    }

    pub fn n_features(&self) -> usize {
        self.n_features
    }

    /// Applies the z-scoring fitted on the training set.
    pub fn standardize(&self, row: &[f64]) -> Vec<f64> {
        row.iter()
            .zip(&self.means)
            .zip(&self.scales)
            .map(|((v, m), s)| (v - m) / s)
            .collect()
    }

    /// Standardized training rows, row-major, in training order.
    pub fn training_points(&self) -> &[f64] {
        &self.points
    }

    pub fn training_labels(&self) -> &[usize] {
        &self.labels
    }

    pub fn neighbors(&self, row: &[f64]) -> Vec<Neighbor> {
        let q = self.standardize(row);
        self.tree.nearest(
            &self.points,
            self.n_features,
            &q,
            self.config.n_neighbors,
            self.config.minkowski_p,
        )
    }

    /// Vote fractions among the k nearest training rows.
    pub fn predict_proba_row(&self, row: &[f64]) -> Vec<f64> {
        let neighbors = self.neighbors(row);
        vote_fractions(neighbors.iter().map(|n| self.labels[n.index]), self.n_classes)
    }

    pub fn predict_row(&self, row: &[f64]) -> usize {
        argmax(&self.predict_proba_row(row))
    }
}

/// Fraction of votes per class.
pub fn vote_fractions(labels: impl Iterator<Item = usize>, n_classes: usize) -> Vec<f64> {
    let mut counts = vec![0usize; n_classes];
    let mut k = 0usize;
    for l in labels {
        counts[l] += 1;
        k += 1;
    }
    counts.iter().map(|&c| c as f64 / k as f64).collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn ds(rows: &[Vec<f64>], labels: Vec<usize>) -> Dataset {
        let schema = (0..rows[0].len()).map(|i| format!("f{i}")).collect();
        Dataset::from_rows(schema, rows, labels, 3).unwrap()
    }

    #[test]
    fn self_is_nearest_with_k1() {
        let train = ds(&[vec![0.0, 0.0], vec![5.0, 1.0], vec![-3.0, 4.0]], vec![0, 1, 2]);
        let cfg = KnnConfig {
            n_neighbors: 1,
            ..KnnConfig::default()
        };
        let m = KnnModel::fit(&train, &cfg).unwrap();
        for (i, row) in train.rows().enumerate() {
            assert_eq!(m.neighbors(row)[0].index, i);
            assert_eq!(m.predict_row(row), train.labels()[i]);
        }
    }

    #[test]
    fn k_equal_to_rows_predicts_global_majority() {
        let rows: Vec<Vec<f64>> = (0..7).map(|i| vec![f64::from(i)]).collect();
        let train = ds(&rows, vec![0, 1, 1, 2, 1, 0, 1]);
        let cfg = KnnConfig {
            n_neighbors: 7,
            ..KnnConfig::default()
        };
        let m = KnnModel::fit(&train, &cfg).unwrap();
        for q in [-100.0, 3.0, 50.0] {
            assert_eq!(m.predict_row(&[q]), 1);
        }
    }

    #[test]
    fn tie_breaks_to_smaller_class() {
        let train = ds(&[vec![-1.0], vec![1.0]], vec![2, 0]);
        let cfg = KnnConfig {
            n_neighbors: 2,
            ..KnnConfig::default()
        };
        let m = KnnModel::fit(&train, &cfg).unwrap();
        assert_eq!(m.predict_proba_row(&[0.0]), vec![0.5, 0.0, 0.5]);
        assert_eq!(m.predict_row(&[0.0]), 0);
    }

    #[test]
    fn fit_errors() {
        let train = ds(&[vec![0.0], vec![1.0]], vec![0, 1]);
        let cfg = KnnConfig {
            n_neighbors: 3,
            ..KnnConfig::default()
        };
        assert!(matches!(
            KnnModel::fit(&train, &cfg),
            Err(ModelError::TooFewRows { need: 3, have: 2 })
        ));
        let empty = Dataset::new(vec!["f0".into()], vec![], vec![], 3).unwrap();
        assert!(matches!(
            KnnModel::fit(&empty, &KnnConfig::default()),
            Err(ModelError::EmptyDataset)
        ));
        let bad = KnnConfig {
            minkowski_p: 0.5,
            ..KnnConfig::default()
        };
        assert!(matches!(KnnModel::fit(&train, &bad), Err(ModelError::InvalidConfig(_))));
    }

    #[test]
    fn constant_feature_does_not_blow_up() {
        let train = ds(&[vec![1.0, 0.0], vec![1.0, 1.0], vec![1.0, 2.0]], vec![0, 1, 2]);
        let cfg = KnnConfig {
            n_neighbors: 1,
            ..KnnConfig::default()
        };
        let m = KnnModel::fit(&train, &cfg).unwrap();
        assert_eq!(m.predict_row(&[1.0, 1.9]), 2);
    }
}
