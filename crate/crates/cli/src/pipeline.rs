//! Stage-by-stage execution of the forecasting pipeline.
//!
//! Stages run in a fixed order: parse, elevation mask, constellation
//! filter, UTC conversion, S4 correction, smoothing, solar join, labeling,
//! balancing, then split, optional grid search, training, evaluation and
//! reporting. Each stage appends a summary to the run provenance, and every
//! failure names the stage it came from.

use std::collections::BTreeSet;
use std::fmt;
use std::fs;
use std::io::BufReader;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use serde_json::{json, Value as Json};
use sha2::{Digest, Sha256};
use thiserror::Error;

use scint_core::eval::{confusion, grid_search, holdout_split, metrics, EvalReport, GridResult};
use scint_core::ingest::{
    apply_elevation_mask, filter_constellations, ingest_files, IngestOptions, IngestReport,
};
use scint_core::models::{ModelConfig, ModelFile, TrainedModel};
use scint_core::preprocess::{
    balance_classes, feature_schema, join_solar, label_samples, smooth_windows, sort_for_smoothing,
    CorrectedObservation, Dataset, Provenance, SeverityClass,
};
use scint_core::rng::RNG_ALGORITHM;
use scint_core::solar::{IndexQuery, IndexSource, RemoteClient};

use crate::config::{hex, LoadedConfig, PipelineConfig};
use crate::plot::emit_plot_data;

pub const INGEST_REPORT_FILE: &str = "ingest_report.json";
pub const DATASET_FILE: &str = "dataset.csv";
pub const DATASET_PROVENANCE_FILE: &str = "dataset.provenance.json";
pub const GRID_JSON_FILE: &str = "grid_search.json";
pub const GRID_CSV_FILE: &str = "grid_search.csv";
pub const MODEL_FILE: &str = "model.json";
pub const EVAL_JSON_FILE: &str = "eval_report.json";
pub const EVAL_CSV_FILE: &str = "eval_report.csv";
pub const PROVENANCE_FILE: &str = "provenance.json";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Stage {
    Config,
    Parse,
    ElevationMask,
    ConstellationFilter,
    UtcConversion,
    S4Correction,
    Smoothing,
    SolarJoin,
    Labeling,
    Balancing,
    Split,
    GridSearch,
    Train,
    Evaluate,
    Report,
}

impl fmt::Display for Stage {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let name = serde_json::to_value(self).expect("stage serializes");
        f.write_str(name.as_str().expect("unit variant"))
    }
}

#[derive(Debug, Error)]
#[error("{stage} stage failed: {message}")]
pub struct PipelineError {
    pub stage: Stage,
    pub message: String,
}

fn fail(stage: Stage) -> impl Fn(String) -> PipelineError {
    move |message| PipelineError { stage, message }
}

trait StageContext<T> {
    fn at(self, stage: Stage) -> Result<T, PipelineError>;
}

impl<T, E: fmt::Display> StageContext<T> for Result<T, E> {
    fn at(self, stage: Stage) -> Result<T, PipelineError> {
        self.map_err(|e| PipelineError {
            stage,
            message: e.to_string(),
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StageRecord {
    pub stage: Stage,
    pub details: Json,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ArtifactRecord {
    pub file: String,
    pub sha256: String,
}

/// Everything needed to trace a run's artifacts back to their inputs.
/// Contains no timestamps, so identical runs write identical provenance.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunProvenance {
    pub format: String,
    pub version: u32,
    pub config_hash: String,
    pub tool_version: String,
    pub rng_algorithm: String,
    pub config: PipelineConfig,
    /// Fields that differ from the built-in defaults.
    pub non_default_fields: Vec<String>,
    /// Command-line overrides, in the order applied.
    pub cli_overrides: Vec<String>,
    pub source_files: Vec<String>,
    /// In execution order.
    pub stages: Vec<StageRecord>,
    pub artifacts: Vec<ArtifactRecord>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IngestArtifact {
    pub config_hash: String,
    pub source_files: Vec<String>,
    pub report: IngestReport,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DatasetArtifact {
    pub config_hash: String,
    pub schema: Vec<String>,
    pub n_rows: usize,
    pub provenance: Provenance,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GridArtifact {
    pub config_hash: String,
    pub result: GridResult,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalArtifact {
    pub format: String,
    pub config_hash: String,
    pub model: String,
    pub train_rows: usize,
    pub test_rows: usize,
    pub report: EvalReport,
}

/// Output of the parse through constellation-filter stages.
#[derive(Debug, Clone)]
pub struct IngestOutput {
    pub observations: Vec<CorrectedObservation>,
    pub report: IngestReport,
}

#[derive(Debug, Clone)]
pub struct RunSummary {
    pub output_dir: PathBuf,
    pub dataset_rows: usize,
    pub model: String,
    pub report: EvalReport,
}

pub struct Pipeline {
    loaded: LoadedConfig,
    provenance: RunProvenance,
}

impl Pipeline {
    /// Validates the configuration. No inputs are touched yet.
    pub fn new(loaded: LoadedConfig) -> Result<Self, PipelineError> {
        loaded.config.validate().at(Stage::Config)?;
        let provenance = RunProvenance {
            format: "scint-provenance".into(),
            version: 1,
            config_hash: loaded.config.hash(),
            tool_version: env!("CARGO_PKG_VERSION").into(),
            rng_algorithm: RNG_ALGORITHM.into(),
            config: loaded.config.clone(),
            non_default_fields: loaded.config.non_default_fields(),
            cli_overrides: loaded.overrides.clone(),
            source_files: Vec::new(),
            stages: Vec::new(),
            artifacts: Vec::new(),
        };
        Ok(Self { loaded, provenance })
    }

    pub fn config(&self) -> &PipelineConfig {
        &self.loaded.config
    }

    pub fn config_hash(&self) -> &str {
        &self.provenance.config_hash
    }

    pub fn output_dir(&self) -> PathBuf {
        self.loaded.output_dir()
    }

    pub fn provenance(&self) -> &RunProvenance {
        &self.provenance
    }

    fn record(&mut self, stage: Stage, details: Json) {
        self.provenance.stages.push(StageRecord { stage, details });
    }

    fn display_path(&self, p: &Path) -> String {
        p.strip_prefix(&self.loaded.base_dir)
            .unwrap_or(p)
            .to_string_lossy()
            .into_owned()
    }

    /// Expands input globs. Fails if any entry matches nothing.
    pub fn resolve_inputs(&mut self) -> Result<Vec<PathBuf>, PipelineError> {
        let err = fail(Stage::Config);
        let mut files = BTreeSet::new();
        for pattern in &self.loaded.config.input.paths {
            let full = self.loaded.resolve(pattern);
            let text = full.to_string_lossy();
            let is_glob = text.contains(['*', '?', '[']);
            if !is_glob {
                if !full.is_file() {
                    return Err(err(format!("input {} does not exist", full.display())));
                }
                files.insert(full);
                continue;
            }
            let mut matched = 0;
            for entry in glob::glob(&text).map_err(|e| err(format!("pattern {pattern}: {e}")))? {
                let path = entry.map_err(|e| err(e.to_string()))?;
                if path.is_file() {
                    files.insert(path);
                    matched += 1;
                }
            }
            if matched == 0 {
                return Err(err(format!("input pattern {pattern} matches no files")));
            }
        }
        let files: Vec<PathBuf> = files.into_iter().collect();
        self.provenance.source_files = files.iter().map(|p| self.display_path(p)).collect();
        if let IndexSource::LocalFile { path } = self.loaded.index_source() {
            if !path.is_file() {
                return Err(err(format!("solar index file {} does not exist", path.display())));
            }
        }
        Ok(files)
    }

    /// Parses inputs, applies the elevation mask and constellation filter,
    /// converts to UTC and corrects S4.
    pub fn ingest(&mut self) -> Result<IngestOutput, PipelineError> {
        let files = self.resolve_inputs()?;
        let cfg = self.loaded.config.clone();
        let options = IngestOptions {
            columns: cfg.input.columns.clone(),
            week_rollover: cfg.input.week_rollover,
        };
        let (records, report) = ingest_files(&files, &options).at(Stage::Parse)?;
        self.record(
            Stage::Parse,
            json!({
                "files": files.len(),
                "lines_read": report.lines_read,
                "records_ok": report.records_ok,
                "skipped": report.skipped,
                "errors": report.error_count(),
            }),
        );

        let before = records.len();
        let masked: Vec<_> = apply_elevation_mask(records, cfg.preprocess.elevation_mask_deg).collect();
        self.record(
            Stage::ElevationMask,
            json!({
                "threshold_deg": cfg.preprocess.elevation_mask_deg,
                "kept": masked.len(),
                "removed": before - masked.len(),
            }),
        );

        let before = masked.len();
        let tracked: Vec<_> = filter_constellations(masked).collect();
        self.record(
            Stage::ConstellationFilter,
            json!({ "kept": tracked.len(), "removed": before - tracked.len() }),
        );

        let mut observations = Vec::with_capacity(tracked.len());
        let mut invalid_time = 0usize;
        for r in &tracked {
            match CorrectedObservation::from_record(r) {
                Ok(o) => observations.push(o),
                Err(_) => invalid_time += 1,
            }
        }
        self.record(
            Stage::UtcConversion,
            json!({ "converted": observations.len(), "invalid_time": invalid_time }),
        );
        let clamped = observations.iter().filter(|o| o.s4_corrected == 0.0).count();
        self.record(
            Stage::S4Correction,
            json!({ "corrected": observations.len(), "clamped_to_zero": clamped }),
        );
        Ok(IngestOutput {
            observations,
            report,
        })
    }

    /// Runs every stage up to and including class balancing.
    pub fn build_dataset(&mut self) -> Result<(Dataset, IngestReport), PipelineError> {
        let IngestOutput {
            mut observations,
            report,
        } = self.ingest()?;
        let cfg = self.loaded.config.clone();

        sort_for_smoothing(&mut observations);
        let smoothed = smooth_windows(
            &observations,
            cfg.preprocess.window_seconds,
            cfg.preprocess.min_window_samples,
        )
        .at(Stage::Smoothing)?;
        self.record(
            Stage::Smoothing,
            json!({
                "window_seconds": cfg.preprocess.window_seconds,
                "min_window_samples": cfg.preprocess.min_window_samples,
                "windows": smoothed.samples.len(),
                "dropped_windows": smoothed.dropped_windows,
            }),
        );
        if smoothed.samples.is_empty() {
            return Err(fail(Stage::Smoothing)("no window has enough samples".into()));
        }

        let dates: Vec<_> = smoothed.samples.iter().map(|s| s.window_start_utc.date()).collect();
        let query = IndexQuery {
            start_date: *dates.iter().min().expect("nonempty"),
            end_date: *dates.iter().max().expect("nonempty"),
            source: self.loaded.index_source(),
        };
        let table = RemoteClient::default()
            .load(&query, cfg.solar.kp_scale)
            .at(Stage::SolarJoin)?;
        let joined = join_solar(&smoothed.samples, &table);
        self.record(
            Stage::SolarJoin,
            json!({
                "start_date": query.start_date,
                "end_date": query.end_date,
                "index_days": table.len(),
                "joined": joined.joined.len(),
                "dropped": joined.dropped,
            }),
        );

        let labeled = label_samples(&joined.joined, &cfg.preprocess.thresholds);
        let mut counts = [0usize; 3];
        for s in &labeled {
            counts[s.label.index()] += 1;
        }
        self.record(
            Stage::Labeling,
            json!({
                "low": cfg.preprocess.thresholds.low,
                "high": cfg.preprocess.thresholds.high,
                "class_counts": counts,
            }),
        );

        let mut dataset = balance_classes(
            &labeled,
            feature_schema(),
            cfg.preprocess.per_class,
            cfg.seeds.balance,
        )
        .at(Stage::Balancing)?;
        dataset.provenance.source_files = self.provenance.source_files.clone();
        self.record(
            Stage::Balancing,
            json!({
                "per_class": cfg.preprocess.per_class,
                "seed": cfg.seeds.balance,
                "rows": dataset.n_rows(),
            }),
        );
        Ok((dataset, report))
    }

    /// Reads a dataset written by an earlier run.
    pub fn load_dataset(&mut self, path: &Path) -> Result<Dataset, PipelineError> {
        let file = fs::File::open(path)
            .map_err(|e| fail(Stage::Config)(format!("{}: {e}", path.display())))?;
        let data = Dataset::read_csv(BufReader::new(file), SeverityClass::ALL.len())
            .at(Stage::Config)?;
        self.provenance.source_files = vec![self.display_path(path)];
        Ok(data)
    }

    pub fn split(&mut self, data: &Dataset) -> Result<(Dataset, Dataset), PipelineError> {
        let s = &self.loaded.config.split;
        let (train, test) =
            holdout_split(data, s.train_fraction, self.loaded.config.seeds.split, s.stratified)
                .at(Stage::Split)?;
        self.record(
            Stage::Split,
            json!({
                "train_fraction": s.train_fraction,
                "stratified": s.stratified,
                "seed": self.loaded.config.seeds.split,
                "train_rows": train.n_rows(),
                "test_rows": test.n_rows(),
                "test_class_counts": test.class_counts(),
            }),
        );
        Ok((train, test))
    }

    /// Runs the configured grid search, if any, on `train`.
    pub fn search(&mut self, train: &Dataset) -> Result<Option<GridResult>, PipelineError> {
        let Some(spec) = self.loaded.config.grid.clone() else {
            return Ok(None);
        };
        let result = grid_search(train, &spec, self.loaded.config.seeds.grid).at(Stage::GridSearch)?;
        let best = result.best_candidate();
        self.record(
            Stage::GridSearch,
            json!({
                "candidates": result.candidates.len(),
                "failed": result.candidates.iter().filter(|c| c.error.is_some()).count(),
                "folds": result.folds,
                "best": best.index,
                "best_params": best.params,
                "best_mean_accuracy": best.mean_accuracy,
            }),
        );
        Ok(Some(result))
    }

    pub fn train(&mut self, train: &Dataset, config: &ModelConfig) -> Result<ModelFile, PipelineError> {
        let model = config.fit(train).at(Stage::Train)?;
        let mut details = json!({ "model": model.name(), "rows": train.n_rows() });
        if let TrainedModel::Gbdt(g) = &model {
            let report = g.fit_report();
            details["rounds"] = json!(g.rounds().len());
            details["final_train_log_loss"] = json!(report.train_log_loss.last());
            details["degenerate_data"] = json!(report.degenerate_data);
        }
        self.record(Stage::Train, details);
        Ok(ModelFile::new(model, train.schema().to_vec(), self.config_hash()))
    }

    pub fn evaluate(&mut self, model: &ModelFile, test: &Dataset) -> Result<EvalReport, PipelineError> {
        let predicted = model.predict(test).at(Stage::Evaluate)?;
        let matrix = confusion(test.labels(), &predicted, test.n_classes()).at(Stage::Evaluate)?;
        let report = metrics(&matrix).at(Stage::Evaluate)?;
        self.record(
            Stage::Evaluate,
            json!({ "model": model.model.name(), "rows": test.n_rows(), "accuracy": report.accuracy }),
        );
        Ok(report)
    }

    fn write_artifact(&mut self, name: &str, bytes: &[u8]) -> Result<(), PipelineError> {
        let dir = self.output_dir();
        let err = fail(Stage::Report);
        fs::create_dir_all(&dir).map_err(|e| err(format!("{}: {e}", dir.display())))?;
        let path = dir.join(name);
        fs::write(&path, bytes).map_err(|e| err(format!("{}: {e}", path.display())))?;
        let sha256 = hex(&Sha256::digest(bytes));
        self.provenance.artifacts.retain(|a| a.file != name);
        self.provenance.artifacts.push(ArtifactRecord {
            file: name.to_string(),
            sha256,
        });
        Ok(())
    }

    fn write_json<T: Serialize>(&mut self, name: &str, value: &T) -> Result<(), PipelineError> {
        let mut text = serde_json::to_string_pretty(value).at(Stage::Report)?;
        text.push('\n');
        self.write_artifact(name, text.as_bytes())
    }

    pub fn write_ingest_report(&mut self, report: &IngestReport) -> Result<(), PipelineError> {
        let artifact = IngestArtifact {
            config_hash: self.config_hash().to_string(),
            source_files: self.provenance.source_files.clone(),
            report: report.clone(),
        };
        self.write_json(INGEST_REPORT_FILE, &artifact)
    }

    pub fn write_dataset(&mut self, data: &Dataset) -> Result<(), PipelineError> {
        let mut csv = Vec::new();
        data.write_csv(&mut csv).at(Stage::Report)?;
        self.write_artifact(DATASET_FILE, &csv)?;
        let sidecar = DatasetArtifact {
            config_hash: self.config_hash().to_string(),
            schema: data.schema().to_vec(),
            n_rows: data.n_rows(),
            provenance: data.provenance.clone(),
        };
        self.write_json(DATASET_PROVENANCE_FILE, &sidecar)
    }

    pub fn write_grid(&mut self, result: &GridResult) -> Result<(), PipelineError> {
        let artifact = GridArtifact {
            config_hash: self.config_hash().to_string(),
            result: result.clone(),
        };
        self.write_json(GRID_JSON_FILE, &artifact)?;
        let mut csv = Vec::new();
        result.write_csv(&mut csv).at(Stage::Report)?;
        self.write_artifact(GRID_CSV_FILE, &csv)
    }

    pub fn write_model(&mut self, model: &ModelFile) -> Result<(), PipelineError> {
        let text = model.to_json().at(Stage::Report)?;
        self.write_artifact(MODEL_FILE, text.as_bytes())
    }

    pub fn write_eval(
        &mut self,
        model: &ModelFile,
        train_rows: usize,
        report: &EvalReport,
    ) -> Result<(), PipelineError> {
        let artifact = EvalArtifact {
            format: "scint-eval".into(),
            config_hash: self.config_hash().to_string(),
            model: model.model.name().into(),
            train_rows,
            test_rows: report.matrix.total() as usize,
            report: report.clone(),
        };
        self.write_json(EVAL_JSON_FILE, &artifact)?;
        let mut csv = Vec::new();
        report.write_csv(&mut csv).at(Stage::Report)?;
        self.write_artifact(EVAL_CSV_FILE, &csv)?;

        let dir = self.output_dir();
        emit_plot_data(report, &dir).at(Stage::Report)?;
        for name in [crate::plot::HEATMAP_FILE, crate::plot::BARS_FILE] {
            let bytes = fs::read(dir.join(name)).at(Stage::Report)?;
            self.write_artifact(name, &bytes)?;
        }
        Ok(())
    }

    /// Writes `provenance.json` and consumes the pipeline.
    pub fn finish(mut self) -> Result<RunProvenance, PipelineError> {
        let prov = self.provenance.clone();
        self.write_json(PROVENANCE_FILE, &prov)?;
        Ok(prov)
    }

    /// Fits the model the config asks for: the grid winner if a grid is
    /// configured, otherwise `model`.
    pub fn select_and_train(&mut self, train: &Dataset) -> Result<ModelFile, PipelineError> {
        let config = match self.search(train)? {
            Some(result) => {
                self.write_grid(&result)?;
                result.best_candidate().config.clone()
            }
            None => self.loaded.config.model.clone(),
        };
        self.train(train, &config)
    }

    /// The whole pipeline, writing every artifact.
    pub fn run(mut self) -> Result<RunSummary, PipelineError> {
        let (dataset, ingest_report) = self.build_dataset()?;
        self.write_ingest_report(&ingest_report)?;
        self.write_dataset(&dataset)?;
        let (train, test) = self.split(&dataset)?;
        let model = self.select_and_train(&train)?;
        self.write_model(&model)?;
        let report = self.evaluate(&model, &test)?;
        self.write_eval(&model, train.n_rows(), &report)?;
        self.record(
            Stage::Report,
            json!({ "artifacts": self.provenance.artifacts.len() + 1 }),
        );
        let summary = RunSummary {
            output_dir: self.output_dir(),
            dataset_rows: dataset.n_rows(),
            model: model.model.name().into(),
            report,
        };
        self.finish()?;
        Ok(summary)
    }
}
