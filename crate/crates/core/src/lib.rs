//! Scintillation severity forecasting pipeline.
//!
//! Stages, in order: [`ingest`] parses receiver ISMR logs, [`preprocess`]
//! corrects, smooths, labels and balances them, [`solar`] supplies daily
//! space-weather indices, [`models`] holds the classifiers and [`eval`] the
//! split, metric and grid-search machinery. [`synth`] writes synthetic
//! receiver logs with known class structure.

pub mod eval;
pub mod ingest;
pub mod models;
pub mod preprocess;
pub mod rng;
pub mod solar;
pub mod synth;
