//! Exhaustive hyperparameter search scored by k-fold accuracy.

use std::collections::BTreeMap;
use std::io::Write;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::models::ModelConfig;
use crate::preprocess::Dataset;

use super::split::stratified_folds;
use super::{confusion, metrics, EvalError};

fn default_folds() -> usize {
    3
}

/// A base model configuration and candidate values for some of its fields.
///
/// Candidates are the Cartesian product of the value lists, enumerated with
/// parameter names in ascending order and the last name varying fastest.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridSpec {
    pub base: ModelConfig,
    #[serde(default)]
    pub params: BTreeMap<String, Vec<Value>>,
    #[serde(default = "default_folds")]
    pub folds: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Candidate {
    pub params: BTreeMap<String, Value>,
    pub config: ModelConfig,
}

impl GridSpec {
    pub fn new(base: ModelConfig) -> Self {
        Self {
            base,
            params: BTreeMap::new(),
            folds: default_folds(),
        }
    }

    pub fn with_param(mut self, name: &str, values: Vec<Value>) -> Self {
        self.params.insert(name.to_string(), values);
        self
    }

    pub fn validate(&self) -> Result<(), EvalError> {
        if self.folds < 2 {
            return Err(EvalError::InvalidGrid(format!(
                "need at least 2 folds, got {}",
                self.folds
            )));
        }
        if let Some((name, _)) = self.params.iter().find(|(_, v)| v.is_empty()) {
            return Err(EvalError::InvalidGrid(format!("parameter {name} has no values")));
        }
        Ok(())
    }

    pub fn n_candidates(&self) -> usize {
        self.params.values().map(Vec::len).product()
    }

    /// Every candidate configuration in enumeration order.
    pub fn candidates(&self) -> Result<Vec<Candidate>, EvalError> {
        self.validate()?;
        let base = serde_json::to_value(&self.base)
            .map_err(|e| EvalError::InvalidGrid(e.to_string()))?;
        let Value::Object(base) = base else {
            return Err(EvalError::InvalidGrid("model config is not an object".into()));
        };
        for name in self.params.keys() {
            if name == "kind" || !base.contains_key(name) {
                return Err(EvalError::InvalidGrid(format!(
                    "{} has no parameter {name}",
                    self.base.name()
                )));
            }
        }

        let names: Vec<&String> = self.params.keys().collect();
        let lists: Vec<&Vec<Value>> = self.params.values().collect();
        let mut out = Vec::with_capacity(self.n_candidates());
        let mut digits = vec![0usize; names.len()];
        loop {
            let mut obj = base.clone();
            let mut params = BTreeMap::new();
            for (i, name) in names.iter().enumerate() {
                let v = lists[i][digits[i]].clone();
                obj.insert((*name).clone(), v.clone());
                params.insert((*name).clone(), v);
            }
            let config: ModelConfig = serde_json::from_value(Value::Object(obj)).map_err(|e| {
                EvalError::InvalidGrid(format!("candidate {}: {e}", out.len()))
            })?;
            out.push(Candidate { params, config });

            // Odometer increment, last position fastest.
            let mut pos = names.len();
            loop {
                if pos == 0 {
                    return Ok(out);
                }
                pos -= 1;
                digits[pos] += 1;
                if digits[pos] < lists[pos].len() {
                    break;
                }
                digits[pos] = 0;
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CandidateResult {
    pub index: usize,
    pub params: BTreeMap<String, Value>,
    pub config: ModelConfig,
    pub fold_accuracies: Vec<f64>,
    /// `None` when the candidate failed on some fold.
    pub mean_accuracy: Option<f64>,
    pub error: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GridResult {
    pub seed: u64,
    pub folds: usize,
    pub candidates: Vec<CandidateResult>,
    /// Index of the winning candidate.
    pub best: usize,
}

impl GridResult {
    pub fn best_candidate(&self) -> &CandidateResult {
        &self.candidates[self.best]
    }

    pub fn to_json(&self) -> Result<String, EvalError> {
        serde_json::to_string_pretty(self).map_err(|e| EvalError::Serialization(e.to_string()))
    }

    /// One row per candidate: index, parameters as JSON, mean accuracy
    /// (`undefined` for failures) and the failure message if any.
    pub fn write_csv<W: Write>(&self, writer: W) -> Result<(), EvalError> {
        let mut w = csv::Writer::from_writer(writer);
        w.write_record(["candidate", "params", "mean_accuracy", "error"])?;
        for c in &self.candidates {
            let params = serde_json::to_string(&c.params)
                .map_err(|e| EvalError::Serialization(e.to_string()))?;
            w.write_record([
                c.index.to_string(),
                params,
                super::format_optional(c.mean_accuracy),
                c.error.clone().unwrap_or_default(),
            ])?;
        }
        w.flush().map_err(csv::Error::from)?;
        Ok(())
    }
}

fn accuracy_of(config: &ModelConfig, train: &Dataset, test: &Dataset) -> Result<f64, String> {
    let model = config.fit(train).map_err(|e| e.to_string())?;
    let predicted = model.predict(test).map_err(|e| e.to_string())?;
    let m = confusion(test.labels(), &predicted, test.n_classes()).map_err(|e| e.to_string())?;
    metrics(&m).map(|r| r.accuracy).map_err(|e| e.to_string())
}

/// Scores every candidate by mean accuracy over the same seeded stratified
/// folds of `train` and picks the best, preferring the earliest candidate
/// on ties. Candidates that fail to fit are reported, not fatal, unless
/// every candidate fails.
pub fn grid_search(train: &Dataset, spec: &GridSpec, seed: u64) -> Result<GridResult, EvalError> {
    let candidates = spec.candidates()?;
    let folds = stratified_folds(train.labels(), train.n_classes(), spec.folds, seed)?;
    let splits: Vec<(Dataset, Dataset)> = (0..folds.len())
        .map(|f| {
            let rest: Vec<usize> = {
                let mut v: Vec<usize> = folds
                    .iter()
                    .enumerate()
                    .filter(|(g, _)| *g != f)
                    .flat_map(|(_, rows)| rows.iter().copied())
                    .collect();
                v.sort_unstable();
                v
            };
            (train.subset(&rest), train.subset(&folds[f]))
        })
        .collect();

    let results: Vec<CandidateResult> = candidates
        .into_par_iter()
        .enumerate()
        .map(|(index, cand)| {
            let mut fold_accuracies = Vec::with_capacity(splits.len());
            let mut error = None;
            for (f, (tr, te)) in splits.iter().enumerate() {
                match accuracy_of(&cand.config, tr, te) {
                    Ok(a) => fold_accuracies.push(a),
                    Err(e) => {
                        error = Some(format!("fold {}: {e}", f + 1));
                        break;
                    }
                }
            }
            let mean_accuracy = error
                .is_none()
                .then(|| fold_accuracies.iter().sum::<f64>() / fold_accuracies.len() as f64);
            CandidateResult {
                index,
                params: cand.params,
                config: cand.config,
                fold_accuracies,
                mean_accuracy,
                error,
            }
        })
        .collect();

    let mut best: Option<(usize, f64)> = None;
    for r in &results {
        if let Some(acc) = r.mean_accuracy {
            if best.is_none_or(|(_, b)| acc > b) {
                best = Some((r.index, acc));
            }
        }
    }
    match best {
        Some((best, _)) => Ok(GridResult {
            seed,
            folds: spec.folds,
            candidates: results,
            best,
        }),
        None => Err(EvalError::AllCandidatesFailed {
            first: results
                .first()
                .map(|r| format!("candidate {}: {}", r.index, r.error.clone().unwrap_or_default()))
                .unwrap_or_default(),
        }),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::models::{GbdtConfig, GnbConfig, KnnConfig};
    use serde_json::json;

    fn blobs(n_per: usize) -> Dataset {
        let mut rows = Vec::new();
        let mut labels = Vec::new();
        for i in 0..n_per {
            for c in 0..3 {
                let t = i as f64 * 0.618;
                rows.push(vec![c as f64 * 4.0 + t.sin(), (t * 1.3).cos() - c as f64 * 3.0]);
                labels.push(c);
            }
        }
        Dataset::from_rows(vec!["a".into(), "b".into()], &rows, labels, 3).unwrap()
    }

    #[test]
    fn enumeration_order_last_name_fastest() {
        let spec = GridSpec::new(ModelConfig::Knn(KnnConfig::default()))
            .with_param("n_neighbors", vec![json!(1), json!(3)])
            .with_param("minkowski_p", vec![json!(1.0), json!(2.0)]);
        let c = spec.candidates().unwrap();
        let got: Vec<(u64, f64)> = c
            .iter()
            .map(|c| (c.params["n_neighbors"].as_u64().unwrap(), c.params["minkowski_p"].as_f64().unwrap()))
            .collect();
        // minkowski_p sorts first, so n_neighbors varies fastest.
        assert_eq!(got, vec![(1, 1.0), (3, 1.0), (1, 2.0), (3, 2.0)]);
        match &c[1].config {
            ModelConfig::Knn(k) => assert_eq!((k.n_neighbors, k.minkowski_p), (3, 1.0)),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn unknown_parameter_is_rejected() {
        let spec = GridSpec::new(ModelConfig::Gnb(GnbConfig::default()))
            .with_param("depth", vec![json!(1)]);
        assert!(matches!(spec.candidates(), Err(EvalError::InvalidGrid(_))));
        let spec = GridSpec::new(ModelConfig::Gnb(GnbConfig::default()))
            .with_param("variance_smoothing", vec![]);
        assert!(matches!(spec.candidates(), Err(EvalError::InvalidGrid(_))));
    }

    #[test]
    fn single_candidate_grid() {
        let data = blobs(20);
        let spec = GridSpec::new(ModelConfig::Gnb(GnbConfig::default()));
        let r = grid_search(&data, &spec, 1).unwrap();
        assert_eq!(r.candidates.len(), 1);
        assert_eq!(r.best, 0);
        assert!(r.best_candidate().mean_accuracy.unwrap() > 0.9);
    }

    #[test]
    fn failed_candidate_is_reported_and_skipped() {
        let data = blobs(10);
        let spec = GridSpec::new(ModelConfig::Knn(KnnConfig::default()))
            .with_param("n_neighbors", vec![json!(1000), json!(3)]);
        let r = grid_search(&data, &spec, 1).unwrap();
        assert!(r.candidates[0].error.is_some());
        assert_eq!(r.candidates[0].mean_accuracy, None);
        assert_eq!(r.best, 1);
        let mut buf = Vec::new();
        r.write_csv(&mut buf).unwrap();
        assert!(String::from_utf8(buf).unwrap().contains("undefined"));
    }

    #[test]
    fn all_failed_is_an_error() {
        let data = blobs(5);
        let spec = GridSpec::new(ModelConfig::Knn(KnnConfig::default()))
            .with_param("n_neighbors", vec![json!(1000)]);
        assert!(matches!(grid_search(&data, &spec, 1), Err(EvalError::AllCandidatesFailed { .. })));
    }

    #[test]
    fn ties_go_to_earliest() {
        let data = blobs(20);
        // Learning rates that all separate the blobs perfectly.
        let spec = GridSpec::new(ModelConfig::Gbdt(GbdtConfig { n_rounds: 5, ..Default::default() }))
            .with_param("learning_rate", vec![json!(0.3), json!(0.5)]);
        let r = grid_search(&data, &spec, 2).unwrap();
        assert_eq!(r.candidates[0].mean_accuracy, r.candidates[1].mean_accuracy);
        assert_eq!(r.best, 0);
    }
}
