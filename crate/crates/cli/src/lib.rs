//! Configuration, orchestration and plot-data output for the `scint`
//! command-line tool.

pub mod config;
pub mod pipeline;
pub mod plot;

pub use config::{synth_pipeline_config, LoadedConfig, PipelineConfig};
pub use pipeline::{Pipeline, PipelineError, RunSummary, Stage};
