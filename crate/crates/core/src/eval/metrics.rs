//! Confusion matrices, accuracy, precision and recall.

use std::io::Write;

use serde::{Deserialize, Serialize};

use super::EvalError;

/// Square count matrix with rows = ground truth, columns = prediction.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ConfusionMatrix {
    counts: Vec<Vec<u64>>,
}

impl ConfusionMatrix {
    pub fn zeros(n_classes: usize) -> Self {
        Self {
            counts: vec![vec![0; n_classes]; n_classes],
        }
    }

    pub fn from_counts(counts: Vec<Vec<u64>>) -> Result<Self, EvalError> {
        let k = counts.len();
        if counts.iter().any(|r| r.len() != k) {
            return Err(EvalError::LengthMismatch(k, counts.iter().map(Vec::len).max().unwrap_or(0)));
        }
        Ok(Self { counts })
    }

    pub fn n_classes(&self) -> usize {
        self.counts.len()
    }

    /// Number of rows with truth `truth` predicted as `predicted`.
    pub fn get(&self, truth: usize, predicted: usize) -> u64 {
        self.counts[truth][predicted]
    }

    pub fn counts(&self) -> &[Vec<u64>] {
        &self.counts
    }

    pub fn total(&self) -> u64 {
        self.counts.iter().flatten().sum()
    }

    pub fn trace(&self) -> u64 {
        (0..self.n_classes()).map(|i| self.counts[i][i]).sum()
    }

    pub fn row_sum(&self, truth: usize) -> u64 {
        self.counts[truth].iter().sum()
    }

    pub fn column_sum(&self, predicted: usize) -> u64 {
        self.counts.iter().map(|r| r[predicted]).sum()
    }

    /// Long format, one line per cell: `true_class,predicted_class,count`
    /// with 1-based class numbers.
    pub fn write_csv<W: Write>(&self, writer: W) -> Result<(), EvalError> {
        let mut w = csv::Writer::from_writer(writer);
        w.write_record(["true_class", "predicted_class", "count"])?;
        for (i, row) in self.counts.iter().enumerate() {
            for (j, c) in row.iter().enumerate() {
                w.write_record([(i + 1).to_string(), (j + 1).to_string(), c.to_string()])?;
            }
        }
        w.flush().map_err(csv::Error::from)?;
        Ok(())
    }
}

pub fn confusion(
    truth: &[usize],
    predicted: &[usize],
    n_classes: usize,
) -> Result<ConfusionMatrix, EvalError> {
    if truth.len() != predicted.len() {
        return Err(EvalError::LengthMismatch(truth.len(), predicted.len()));
    }
    let mut m = ConfusionMatrix::zeros(n_classes);
    for (&t, &p) in truth.iter().zip(predicted) {
        for label in [t, p] {
            if label >= n_classes {
                return Err(EvalError::LabelOutOfRange { label, n_classes });
            }
        }
        m.counts[t][p] += 1;
    }
    Ok(m)
}

/// Accuracy plus per-class precision and recall. A ratio whose
/// denominator is zero is `None`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub matrix: ConfusionMatrix,
    pub accuracy: f64,
    pub per_class_precision: Vec<Option<f64>>,
    pub per_class_recall: Vec<Option<f64>>,
}

fn ratio(num: u64, den: u64) -> Option<f64> {
    (den > 0).then(|| num as f64 / den as f64)
}

pub fn metrics(matrix: &ConfusionMatrix) -> Result<EvalReport, EvalError> {
    let total = matrix.total();
    if total == 0 {
        return Err(EvalError::EmptyMatrix);
    }
    let k = matrix.n_classes();
    Ok(EvalReport {
        matrix: matrix.clone(),
        accuracy: matrix.trace() as f64 / total as f64,
        per_class_precision: (0..k)
            .map(|j| ratio(matrix.get(j, j), matrix.column_sum(j)))
            .collect(),
        per_class_recall: (0..k)
            .map(|i| ratio(matrix.get(i, i), matrix.row_sum(i)))
            .collect(),
    })
}

/// Writes `undefined` for a missing ratio.
pub fn format_optional(v: Option<f64>) -> String {
    v.map_or_else(|| "undefined".to_string(), |x| x.to_string())
}

impl EvalReport {
    pub fn to_json(&self) -> Result<String, EvalError> {
        serde_json::to_string_pretty(self).map_err(|e| EvalError::Serialization(e.to_string()))
    }

    /// `metric,class,value` rows: overall accuracy, then precision and
    /// recall per 1-based class.
    pub fn write_csv<W: Write>(&self, writer: W) -> Result<(), EvalError> {
        let mut w = csv::Writer::from_writer(writer);
        w.write_record(["metric", "class", "value"])?;
        w.write_record(["accuracy", "all", &self.accuracy.to_string()])?;
        for (name, values) in [
            ("precision", &self.per_class_precision),
            ("recall", &self.per_class_recall),
        ] {
            for (c, v) in values.iter().enumerate() {
                w.write_record([name, &(c + 1).to_string(), &format_optional(*v)])?;
            }
        }
        w.flush().map_err(csv::Error::from)?;
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn perfect_predictions_are_diagonal() {
        let y = [0, 1, 2, 2, 1];
        let m = confusion(&y, &y, 3).unwrap();
        assert_eq!(m.counts(), &[vec![1, 0, 0], vec![0, 2, 0], vec![0, 0, 2]]);
    }

    #[test]
    fn empty_inputs_give_zero_matrix() {
        let m = confusion(&[], &[], 3).unwrap();
        assert_eq!(m, ConfusionMatrix::zeros(3));
        assert_eq!(metrics(&m), Err(EvalError::EmptyMatrix));
    }

    #[test]
    fn identity_metrics() {
        let m = confusion(&[0, 1, 2], &[0, 1, 2], 3).unwrap();
        let r = metrics(&m).unwrap();
        assert_eq!(r.accuracy, 1.0);
        assert!(r.per_class_precision.iter().chain(&r.per_class_recall).all(|v| *v == Some(1.0)));
    }

    #[test]
    fn undefined_precision_when_class_never_predicted() {
        let m = confusion(&[0, 1, 2], &[0, 0, 2], 3).unwrap();
        let r = metrics(&m).unwrap();
        assert_eq!(r.per_class_precision[1], None);
        assert_eq!(r.per_class_recall[1], Some(0.0));
        let mut buf = Vec::new();
        r.write_csv(&mut buf).unwrap();
        assert!(String::from_utf8(buf).unwrap().contains("precision,2,undefined"));
    }

    #[test]
    fn errors() {
        assert_eq!(confusion(&[0], &[0, 1], 2), Err(EvalError::LengthMismatch(1, 2)));
        assert_eq!(
            confusion(&[0], &[2], 2),
            Err(EvalError::LabelOutOfRange { label: 2, n_classes: 2 })
        );
    }

    #[test]
    fn csv_long_format() {
        let m = confusion(&[0, 1], &[1, 1], 2).unwrap();
        let mut buf = Vec::new();
        m.write_csv(&mut buf).unwrap();
        assert_eq!(
            String::from_utf8(buf).unwrap(),
            "true_class,predicted_class,count\n1,1,0\n1,2,1\n2,1,0\n2,2,1\n"
        );
    }

    fn labels() -> impl Strategy<Value = (Vec<usize>, Vec<usize>)> {
        (1usize..200).prop_flat_map(|n| {
            (
                proptest::collection::vec(0usize..3, n),
                proptest::collection::vec(0usize..3, n),
            )
        })
    }

    proptest! {
        #[test]
        fn self_confusion_is_perfect(y in proptest::collection::vec(0usize..4, 1..100)) {
            let r = metrics(&confusion(&y, &y, 4).unwrap()).unwrap();
            prop_assert_eq!(r.accuracy, 1.0);
        }

        #[test]
        fn accuracy_is_frequency_weighted_recall((t, p) in labels()) {
            let m = confusion(&t, &p, 3).unwrap();
            let r = metrics(&m).unwrap();
            let n = t.len() as f64;
            let weighted: f64 = (0..3)
                .map(|c| r.per_class_recall[c].unwrap_or(0.0) * m.row_sum(c) as f64 / n)
                .sum();
            prop_assert!((weighted - r.accuracy).abs() < 1e-12);
        }

        #[test]
        fn relabeling_permutes_metrics((t, p) in labels(), perm_id in 0usize..6) {
            let perms = [[0, 1, 2], [0, 2, 1], [1, 0, 2], [1, 2, 0], [2, 0, 1], [2, 1, 0]];
            let perm = perms[perm_id];
            let r = metrics(&confusion(&t, &p, 3).unwrap()).unwrap();
            let t2: Vec<usize> = t.iter().map(|&y| perm[y]).collect();
            let p2: Vec<usize> = p.iter().map(|&y| perm[y]).collect();
            let r2 = metrics(&confusion(&t2, &p2, 3).unwrap()).unwrap();
            prop_assert_eq!(r.accuracy, r2.accuracy);
            for c in 0..3 {
                prop_assert_eq!(r.per_class_precision[c], r2.per_class_precision[perm[c]]);
                prop_assert_eq!(r.per_class_recall[c], r2.per_class_recall[perm[c]]);
            }
        }
    }
}
