//! Gaussian naive Bayes posteriors against a direct density product.

use std::f64::consts::PI;

use scint_core::models::{GnbConfig, GnbModel};
use scint_core::preprocess::Dataset;
use scint_core::rng::SeededRng;

fn blobs(seed: u64, n: usize, d: usize) -> Dataset {
    let mut rng = SeededRng::new(seed);
    let mut rows = Vec::new();
    let mut labels = Vec::new();
    for i in 0..n {
        let c = i % 3;
        rows.push(
            (0..d)
                .map(|j| c as f64 * (1.0 + j as f64 * 0.3) + rng.unit() * 2.0 - 1.0)
                .collect::<Vec<_>>(),
        );
        labels.push(c);
    }
    let schema = (0..d).map(|j| format!("f{j}")).collect();
    Dataset::from_rows(schema, &rows, labels, 3).unwrap()
}

#[test]
fn posteriors_match_density_product() {
    let d = 4;
    let train = blobs(3, 300, d);
    let smoothing = 1e-9;
    let model = GnbModel::fit(&train, &GnbConfig { variance_smoothing: smoothing }).unwrap();

    // Class statistics recomputed here with population variance.
    let mut stats = Vec::new();
    for c in 0..3 {
        let rows: Vec<&[f64]> = train
            .rows()
            .zip(train.labels())
            .filter(|(_, &l)| l == c)
            .map(|(r, _)| r)
            .collect();
        let n = rows.len() as f64;
        let mean: Vec<f64> = (0..d).map(|j| rows.iter().map(|r| r[j]).sum::<f64>() / n).collect();
        let var: Vec<f64> = (0..d)
            .map(|j| rows.iter().map(|r| (r[j] - mean[j]).powi(2)).sum::<f64>() / n + smoothing)
            .collect();
        stats.push((n / train.n_rows() as f64, mean, var));
    }

    let queries = blobs(4, 50, d);
    for row in queries.rows() {
        let joint: Vec<f64> = stats
            .iter()
            .map(|(prior, mean, var)| {
                prior
                    * (0..d)
                        .map(|j| {
                            (-(row[j] - mean[j]).powi(2) / (2.0 * var[j])).exp()
                                / (2.0 * PI * var[j]).sqrt()
                        })
                        .product::<f64>()
            })
            .collect();
        let total: f64 = joint.iter().sum();
        let got = model.predict_proba_row(row);
        for c in 0..3 {
            assert!((got[c] - joint[c] / total).abs() < 1e-9, "{got:?} vs {joint:?}");
        }
    }
}

#[test]
fn far_outliers_stay_finite() {
    let train = blobs(5, 90, 3);
    let model = GnbModel::fit(&train, &GnbConfig::default()).unwrap();
    let p = model.predict_proba_row(&[1e6, -1e6, 1e6]);
    assert!(p.iter().all(|v| v.is_finite()));
    assert!((p.iter().sum::<f64>() - 1.0).abs() < 1e-12);
}
