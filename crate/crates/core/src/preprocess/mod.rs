//! Turns validated ISMR records into a labeled, class-balanced dataset.

mod dataset;
mod features;
mod label;
mod s4;
mod smooth;

use crate::solar::{SolarIndices, SolarTable};

pub use dataset::{balance_classes, Dataset, DatasetError, LabeledSample, Provenance, LABEL_COLUMN};
pub use features::{build_features, feature_schema, FEATURE_SCHEMA, N_FEATURES};
pub use label::{label_severity, SeverityClass, SeverityThresholds};
pub use s4::{compute_s4_total, correct_s4, IntensityError, IntensitySeries};
pub use smooth::{
    circular_mean_deg, smooth_windows, sort_for_smoothing, window_start, CorrectedObservation,
    SmoothError, SmoothOutput, SmoothedSample, DEFAULT_MIN_WINDOW_SAMPLES, DEFAULT_WINDOW_SECONDS,
};

/// Samples paired with the indices of their UTC date.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct JoinOutput {
    pub joined: Vec<(SmoothedSample, SolarIndices)>,
    /// Samples whose date had no indices.
    pub dropped: usize,
}

pub fn join_solar(samples: &[SmoothedSample], table: &SolarTable) -> JoinOutput {
    let mut out = JoinOutput::default();
    for s in samples {
        match table.get(s.window_start_utc.date()) {
            Some(ix) => out.joined.push((*s, *ix)),
            None => out.dropped += 1,
        }
    }
    out
}

/// Builds feature vectors and severity labels for joined samples.
pub fn label_samples(
    joined: &[(SmoothedSample, SolarIndices)],
    thresholds: &SeverityThresholds,
) -> Vec<LabeledSample> {
    joined
        .iter()
        .map(|(s, ix)| LabeledSample {
            features: build_features(s, ix).to_vec(),
            label: thresholds.classify(s.mean_s4),
        })
        .collect()
}
