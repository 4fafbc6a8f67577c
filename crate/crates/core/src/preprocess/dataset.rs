//! Feature matrix with labels, balanced sampling and CSV serialization.

use std::io::{Read, Write};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::rng::{SeededRng, RNG_ALGORITHM};

use super::label::SeverityClass;

pub const LABEL_COLUMN: &str = "label";

#[derive(Debug, Error)]
pub enum DatasetError {
    #[error("class {class} has {have} samples, need {need}")]
    InsufficientClass {
        class: SeverityClass,
        have: usize,
        need: usize,
    },
    #[error("row {row} has {got} values, schema has {want}")]
    RowWidth { row: usize, got: usize, want: usize },
    #[error("row {row} column {column} is not finite")]
    NonFinite { row: usize, column: usize },
    #[error("label {label} at row {row} is out of range for {n_classes} classes")]
    LabelOutOfRange {
        row: usize,
        label: usize,
        n_classes: usize,
    },
    #[error("{0} feature rows but {1} labels")]
    LengthMismatch(usize, usize),
    #[error("csv: {0}")]
    Csv(#[from] csv::Error),
    #[error("csv line {line}: {detail}")]
    CsvContent { line: usize, detail: String },
}

/// Where a dataset came from and how it was sampled.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Provenance {
    pub seed: Option<u64>,
    pub rng_algorithm: Option<String>,
    /// Per-class sample counts before balancing.
    pub class_counts_available: Vec<usize>,
    /// Per-class sample counts in this dataset.
    pub class_counts_selected: Vec<usize>,
    pub source_files: Vec<String>,
}

/// Row-major feature matrix plus zero-based class labels.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    schema: Vec<String>,
    values: Vec<f64>,
    labels: Vec<usize>,
    n_classes: usize,
    pub provenance: Provenance,
}

/// A single feature vector with its severity label.
#[derive(Debug, Clone, PartialEq)]
pub struct LabeledSample {
    pub features: Vec<f64>,
    pub label: SeverityClass,
}

impl Dataset {
    pub fn new(
        schema: Vec<String>,
        values: Vec<f64>,
        labels: Vec<usize>,
        n_classes: usize,
    ) -> Result<Self, DatasetError> {
        let width = schema.len();
        if width == 0 || !values.len().is_multiple_of(width) {
            return Err(DatasetError::RowWidth {
                row: 0,
                got: values.len(),
                want: width,
            });
        }
        let n_rows = values.len() / width;
        if n_rows != labels.len() {
            return Err(DatasetError::LengthMismatch(n_rows, labels.len()));
        }
        if let Some(i) = values.iter().position(|v| !v.is_finite()) {
            return Err(DatasetError::NonFinite {
                row: i / width,
                column: i % width,
            });
        }
        if let Some((row, &label)) = labels.iter().enumerate().find(|(_, l)| **l >= n_classes) {
            return Err(DatasetError::LabelOutOfRange {
                row,
                label,
                n_classes,
            });
        }
        Ok(Self {
            schema,
            values,
            labels,
            n_classes,
            provenance: Provenance::default(),
        })
    }

    pub fn from_rows(
        schema: Vec<String>,
        rows: &[Vec<f64>],
        labels: Vec<usize>,
        n_classes: usize,
    ) -> Result<Self, DatasetError> {
        let width = schema.len();
        let mut values = Vec::with_capacity(rows.len() * width);
        for (row, r) in rows.iter().enumerate() {
            if r.len() != width {
                return Err(DatasetError::RowWidth {
                    row,
                    got: r.len(),
                    want: width,
                });
            }
            values.extend_from_slice(r);
        }
        Self::new(schema, values, labels, n_classes)
    }

    pub fn schema(&self) -> &[String] {
        &self.schema
    }

    pub fn n_features(&self) -> usize {
        self.schema.len()
    }

    pub fn n_rows(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn n_classes(&self) -> usize {
        self.n_classes
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn row(&self, i: usize) -> &[f64] {
        let w = self.n_features();
        &self.values[i * w..(i + 1) * w]
    }

    pub fn rows(&self) -> impl Iterator<Item = &[f64]> {
        self.values.chunks_exact(self.n_features())
    }

    pub fn labels(&self) -> &[usize] {
        &self.labels
    }

    pub fn class_counts(&self) -> Vec<usize> {
        let mut counts = vec![0; self.n_classes];
        for &l in &self.labels {
            counts[l] += 1;
        }
        counts
    }

    /// Rows at `indices`, in that order. Provenance is carried over.
    pub fn subset(&self, indices: &[usize]) -> Dataset {
        let w = self.n_features();
        let mut values = Vec::with_capacity(indices.len() * w);
        let mut labels = Vec::with_capacity(indices.len());
        for &i in indices {
            values.extend_from_slice(self.row(i));
            labels.push(self.labels[i]);
        }
        Dataset {
            schema: self.schema.clone(),
            values,
            labels,
            n_classes: self.n_classes,
            provenance: self.provenance.clone(),
        }
    }

    /// Same features with replacement labels.
    pub fn with_labels(&self, labels: Vec<usize>) -> Result<Dataset, DatasetError> {
        let mut d = Dataset::new(self.schema.clone(), self.values.clone(), labels, self.n_classes)?;
        d.provenance = self.provenance.clone();
        Ok(d)
    }

    /// Header is the schema followed by `label`; labels are written 1-based.
    pub fn write_csv<W: Write>(&self, writer: W) -> Result<(), DatasetError> {
        let mut w = csv::Writer::from_writer(writer);
        let mut header: Vec<&str> = self.schema.iter().map(String::as_str).collect();
        header.push(LABEL_COLUMN);
        w.write_record(&header)?;
        let mut record = Vec::with_capacity(header.len());
        for (row, label) in self.rows().zip(&self.labels) {
            record.clear();
            record.extend(row.iter().map(|v| v.to_string()));
            record.push((label + 1).to_string());
            w.write_record(&record)?;
        }
        w.flush().map_err(csv::Error::from)?;
        Ok(())
    }

    pub fn read_csv<R: Read>(reader: R, n_classes: usize) -> Result<Dataset, DatasetError> {
        let mut r = csv::Reader::from_reader(reader);
        let header = r.headers()?.clone();
        let n_cols = header.len();
        if n_cols < 2 || &header[n_cols - 1] != LABEL_COLUMN {
            return Err(DatasetError::CsvContent {
                line: 1,
                detail: format!("last column must be `{LABEL_COLUMN}`"),
            });
        }
        let schema: Vec<String> = header.iter().take(n_cols - 1).map(str::to_owned).collect();
        let mut values = Vec::new();
        let mut labels = Vec::new();
        for (i, rec) in r.records().enumerate() {
            let rec = rec?;
            let line = i + 2;
            let bad = |detail: String| DatasetError::CsvContent { line, detail };
            for field in rec.iter().take(n_cols - 1) {
                values.push(
                    field
                        .parse::<f64>()
                        .map_err(|_| bad(format!("`{field}` is not a number")))?,
                );
            }
            let label: usize = rec[n_cols - 1]
                .parse()
                .map_err(|_| bad(format!("bad label `{}`", &rec[n_cols - 1])))?;
            if label == 0 {
                return Err(bad("labels are 1-based".into()));
            }
            labels.push(label - 1);
        }
        Dataset::new(schema, values, labels, n_classes)
    }
}

/// Draws exactly `per_class` samples from each severity class, uniformly
/// without replacement. Selected rows keep their input order within a class,
/// and classes appear in class order.
pub fn balance_classes(
    samples: &[LabeledSample],
    schema: Vec<String>,
    per_class: usize,
    seed: u64,
) -> Result<Dataset, DatasetError> {
    let mut members: Vec<Vec<usize>> = vec![Vec::new(); SeverityClass::ALL.len()];
    for (i, s) in samples.iter().enumerate() {
        members[s.label.index()].push(i);
    }
    for class in SeverityClass::ALL {
        let have = members[class.index()].len();
        if have < per_class {
            return Err(DatasetError::InsufficientClass {
                class,
                have,
                need: per_class,
            });
        }
    }

    let mut rng = SeededRng::new(seed);
    let width = schema.len();
    let mut values = Vec::with_capacity(per_class * members.len() * width);
    let mut labels = Vec::with_capacity(per_class * members.len());
    for (class, idx) in members.iter().enumerate() {
        let mut picked: Vec<usize> = rng
            .sample_indices(idx.len(), per_class)
            .into_iter()
            .map(|j| idx[j])
            .collect();
        picked.sort_unstable();
        for i in picked {
            let f = &samples[i].features;
            if f.len() != width {
                return Err(DatasetError::RowWidth {
                    row: i,
                    got: f.len(),
                    want: width,
                });
            }
            values.extend_from_slice(f);
            labels.push(class);
        }
    }
    let mut ds = Dataset::new(schema, values, labels, SeverityClass::ALL.len())?;
    ds.provenance = Provenance {
        seed: Some(seed),
        rng_algorithm: Some(RNG_ALGORITHM.to_owned()),
        class_counts_available: members.iter().map(Vec::len).collect(),
        class_counts_selected: vec![per_class; members.len()],
        source_files: Vec::new(),
    };
    Ok(ds)
}
