//! Grid search against a hand-written nested loop over the same folds.

use scint_core::eval::{grid_search, stratified_folds, GridSpec};
use scint_core::models::{GbdtConfig, KnnConfig, ModelConfig};
use scint_core::preprocess::Dataset;
use scint_core::rng::SeededRng;
use serde_json::json;

fn noisy(seed: u64, n: usize) -> Dataset {
    let mut rng = SeededRng::new(seed);
    let mut rows = Vec::new();
    let mut labels = Vec::new();
    for _ in 0..n {
        let x: Vec<f64> = (0..3).map(|_| rng.unit()).collect();
        let mut y = ((x[0] * 2.0 + x[1]) * 1.5) as usize % 3;
        if rng.unit() < 0.2 {
            y = rng.below(3);
        }
        rows.push(x);
        labels.push(y);
    }
    let schema = (0..3).map(|j| format!("f{j}")).collect();
    Dataset::from_rows(schema, &rows, labels, 3).unwrap()
}

fn fold_accuracy(config: &ModelConfig, data: &Dataset, test_rows: &[usize]) -> f64 {
    let train_rows: Vec<usize> = (0..data.n_rows()).filter(|i| !test_rows.contains(i)).collect();
    let model = config.fit(&data.subset(&train_rows)).unwrap();
    let hits = test_rows
        .iter()
        .filter(|&&i| model.predict_row(data.row(i)) == data.labels()[i])
        .count();
    hits as f64 / test_rows.len() as f64
}

#[test]
fn knn_grid_matches_nested_loop() {
    let data = noisy(3, 450);
    let spec = GridSpec::new(ModelConfig::Knn(KnnConfig::default()))
        .with_param("n_neighbors", vec![json!(1), json!(15)])
        .with_param("minkowski_p", vec![json!(1.0), json!(2.0)]);
    let seed = 17;
    let result = grid_search(&data, &spec, seed).unwrap();
    assert_eq!(result.candidates.len(), 4);

    let folds = stratified_folds(data.labels(), 3, spec.folds, seed).unwrap();
    let mut best = (usize::MAX, f64::NEG_INFINITY);
    let mut index = 0;
    // Names ascending, last name varying fastest.
    for p in [1.0, 2.0] {
        for k in [1, 15] {
            let config = ModelConfig::Knn(KnnConfig {
                n_neighbors: k,
                minkowski_p: p,
                ..Default::default()
            });
            let accs: Vec<f64> = folds.iter().map(|f| fold_accuracy(&config, &data, f)).collect();
            let mean = accs.iter().sum::<f64>() / accs.len() as f64;
            let got = &result.candidates[index];
            assert_eq!(got.config, config);
            assert_eq!(got.fold_accuracies, accs);
            assert_eq!(got.mean_accuracy, Some(mean));
            if mean > best.1 {
                best = (index, mean);
            }
            index += 1;
        }
    }
    assert_eq!(result.best, best.0);
}

#[test]
fn gbdt_grid_matches_nested_loop() {
    let data = noisy(4, 300);
    let base = GbdtConfig {
        n_rounds: 10,
        ..Default::default()
    };
    let spec = GridSpec::new(ModelConfig::Gbdt(base.clone()))
        .with_param("max_depth", vec![json!(1), json!(4)])
        .with_param("learning_rate", vec![json!(0.05), json!(0.3)]);
    let result = grid_search(&data, &spec, 5).unwrap();
    let folds = stratified_folds(data.labels(), 3, spec.folds, 5).unwrap();
    let mut means = Vec::new();
    for lr in [0.05, 0.3] {
        for depth in [1, 4] {
            let config = ModelConfig::Gbdt(GbdtConfig {
                learning_rate: lr,
                max_depth: depth,
                ..base.clone()
            });
            let accs: Vec<f64> = folds.iter().map(|f| fold_accuracy(&config, &data, f)).collect();
            means.push(accs.iter().sum::<f64>() / accs.len() as f64);
        }
    }
    let got: Vec<f64> = result.candidates.iter().map(|c| c.mean_accuracy.unwrap()).collect();
    assert_eq!(got, means);
    let top = means.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    assert_eq!(result.best, means.iter().position(|&m| m == top).unwrap());
}

#[test]
fn same_seed_gives_same_result() {
    let data = noisy(6, 200);
    let spec = GridSpec::new(ModelConfig::Knn(KnnConfig::default()))
        .with_param("n_neighbors", vec![json!(3), json!(7), json!(11)]);
    let a = grid_search(&data, &spec, 9).unwrap();
    let b = grid_search(&data, &spec, 9).unwrap();
    assert_eq!(a, b);
}
