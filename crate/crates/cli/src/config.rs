//! Pipeline configuration: one TOML file, overridable field by field.

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use serde_json::Value as Json;
use sha2::{Digest, Sha256};
use thiserror::Error;

use scint_core::eval::GridSpec;
use scint_core::ingest::{ColumnMap, WeekRollover};
use scint_core::models::{GbdtConfig, ModelConfig};
use scint_core::preprocess::{SeverityThresholds, DEFAULT_MIN_WINDOW_SAMPLES, DEFAULT_WINDOW_SECONDS};
use scint_core::solar::{IndexSource, KpScale};
use scint_core::synth::{SynthSpec, ISMR_DIR, SOLAR_FILE};

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("cannot read {path}: {source}")]
    Read {
        path: PathBuf,
        source: std::io::Error,
    },
    #[error("cannot parse {path}: {message}")]
    Parse { path: PathBuf, message: String },
    #[error("bad override `{entry}`: {message}")]
    Override { entry: String, message: String },
    #[error("invalid config: {0}")]
    Invalid(String),
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct InputConfig {
    /// File paths or glob patterns, relative to the config file.
    pub paths: Vec<String>,
    pub columns: ColumnMap,
    pub week_rollover: WeekRollover,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PreprocessConfig {
    pub elevation_mask_deg: f64,
    pub window_seconds: i64,
    pub min_window_samples: usize,
    pub thresholds: SeverityThresholds,
    pub per_class: usize,
}

impl Default for PreprocessConfig {
    fn default() -> Self {
        Self {
            elevation_mask_deg: 20.0,
            window_seconds: DEFAULT_WINDOW_SECONDS,
            min_window_samples: DEFAULT_MIN_WINDOW_SAMPLES,
            thresholds: SeverityThresholds::default(),
            per_class: 9000,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SolarConfig {
    pub index: IndexSource,
    pub kp_scale: KpScale,
}

impl Default for SolarConfig {
    fn default() -> Self {
        Self {
            index: IndexSource::Remote,
            kp_scale: KpScale::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SplitConfig {
    pub train_fraction: f64,
    pub stratified: bool,
}

impl Default for SplitConfig {
    fn default() -> Self {
        Self {
            train_fraction: 0.8,
            stratified: true,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SeedConfig {
    pub balance: u64,
    pub split: u64,
    pub grid: u64,
}

impl Default for SeedConfig {
    fn default() -> Self {
        Self {
            balance: 42,
            split: 42,
            grid: 42,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct OutputConfig {
    /// Relative to the config file.
    pub dir: String,
}

impl Default for OutputConfig {
    fn default() -> Self {
        Self { dir: "out".into() }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PipelineConfig {
    pub input: InputConfig,
    pub preprocess: PreprocessConfig,
    pub solar: SolarConfig,
    pub split: SplitConfig,
    pub seeds: SeedConfig,
    pub model: ModelConfig,
    /// When present, the model is chosen by grid search on the train split
    /// and `model` is ignored.
    pub grid: Option<GridSpec>,
    pub output: OutputConfig,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        Self {
            input: InputConfig::default(),
            preprocess: PreprocessConfig::default(),
            solar: SolarConfig::default(),
            split: SplitConfig::default(),
            seeds: SeedConfig::default(),
            model: ModelConfig::Gbdt(GbdtConfig::default()),
            grid: None,
            output: OutputConfig::default(),
        }
    }
}

impl PipelineConfig {
    pub fn from_toml(text: &str) -> Result<Self, String> {
        toml::from_str(text).map_err(|e| e.to_string())
    }

    pub fn to_toml(&self) -> String {
        toml::to_string_pretty(self).expect("config serializes to TOML")
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        let bad = |m: String| Err(ConfigError::Invalid(m));
        if self.input.paths.is_empty() {
            return bad("input.paths is empty".into());
        }
        self.input.columns.validate().map_err(ConfigError::Invalid)?;
        let p = &self.preprocess;
        if !(0.0..=90.0).contains(&p.elevation_mask_deg) {
            return bad(format!(
                "preprocess.elevation_mask_deg must be in [0, 90], got {}",
                p.elevation_mask_deg
            ));
        }
        if p.window_seconds <= 0 {
            return bad("preprocess.window_seconds must be positive".into());
        }
        p.thresholds.validate().map_err(|e| ConfigError::Invalid(e.to_string()))?;
        let f = self.split.train_fraction;
        if !(f > 0.0 && f < 1.0) {
            return bad(format!("split.train_fraction must be in (0, 1), got {f}"));
        }
        match &self.model {
            ModelConfig::Knn(c) => c.validate(),
            ModelConfig::Gnb(c) => c.validate(),
            ModelConfig::Gbdt(c) => c.validate(),
        }
        .map_err(|e| ConfigError::Invalid(format!("model: {e}")))?;
        if let Some(grid) = &self.grid {
            grid.candidates()
                .map_err(|e| ConfigError::Invalid(format!("grid: {e}")))?;
        }
        Ok(())
    }

    /// Applies `key.path=value`. The value is read as a TOML value, falling
    /// back to a bare string. Setting a `kind` resets its table to that
    /// kind's defaults.
    pub fn apply_override(&mut self, entry: &str) -> Result<(), ConfigError> {
        let err = |message: String| ConfigError::Override {
            entry: entry.to_string(),
            message,
        };
        let (key, raw) = entry
            .split_once('=')
            .ok_or_else(|| err("expected key=value".into()))?;
        let key = key.trim();
        let raw = raw.trim();
        let value = toml::from_str::<toml::Table>(&format!("v = {raw}"))
            .ok()
            .and_then(|mut t| t.remove("v"))
            .unwrap_or_else(|| toml::Value::String(raw.to_string()));

        let mut root = toml::Value::try_from(&*self).map_err(|e| err(e.to_string()))?;
        let parts: Vec<&str> = key.split('.').collect();
        let mut node = &mut root;
        for part in &parts[..parts.len() - 1] {
            let table = node
                .as_table_mut()
                .ok_or_else(|| err(format!("`{part}` is not inside a table")))?;
            node = table
                .entry(part.to_string())
                .or_insert_with(|| toml::Value::Table(toml::Table::new()));
        }
        let table = node
            .as_table_mut()
            .ok_or_else(|| err("parent is not a table".into()))?;
        let last = parts[parts.len() - 1];
        if last == "kind" {
            // Switching variant: the old variant's fields would not parse.
            table.clear();
        }
        table.insert(last.to_string(), value);
        *self = root.try_into().map_err(|e: toml::de::Error| err(e.message().to_string()))?;
        Ok(())
    }

    /// Fields that differ from the defaults, as `dotted.path = json`.
    pub fn non_default_fields(&self) -> Vec<String> {
        let mut ours = BTreeMap::new();
        let mut defaults = BTreeMap::new();
        flatten("", &serde_json::to_value(self).expect("config serializes"), &mut ours);
        flatten(
            "",
            &serde_json::to_value(PipelineConfig::default()).expect("config serializes"),
            &mut defaults,
        );
        ours.iter()
            .filter(|(k, v)| defaults.get(*k) != Some(v))
            .map(|(k, v)| format!("{k} = {v}"))
            .collect()
    }

    /// SHA-256 of the canonical JSON form, excluding the output directory,
    /// which says where artifacts go rather than what they contain.
    pub fn hash(&self) -> String {
        let mut canonical = self.clone();
        canonical.output = OutputConfig::default();
        let text = serde_json::to_string(&canonical).expect("config serializes");
        hex(&Sha256::digest(text.as_bytes()))
    }
}

pub fn hex(bytes: &[u8]) -> String {
    bytes.iter().map(|b| format!("{b:02x}")).collect()
}

fn flatten(prefix: &str, value: &Json, out: &mut BTreeMap<String, Json>) {
    match value {
        Json::Object(map) if !map.is_empty() => {
            for (k, v) in map {
                let key = if prefix.is_empty() {
                    k.clone()
                } else {
                    format!("{prefix}.{k}")
                };
                flatten(&key, v, out);
            }
        }
        other => {
            out.insert(prefix.to_string(), other.clone());
        }
    }
}

/// A config plus the directory its relative paths are resolved against.
#[derive(Debug, Clone, PartialEq)]
pub struct LoadedConfig {
    pub config: PipelineConfig,
    pub base_dir: PathBuf,
    /// Overrides applied after loading, in order.
    pub overrides: Vec<String>,
}

impl LoadedConfig {
    pub fn new(config: PipelineConfig, base_dir: impl Into<PathBuf>) -> Self {
        Self {
            config,
            base_dir: base_dir.into(),
            overrides: Vec::new(),
        }
    }

    pub fn load(path: &Path) -> Result<Self, ConfigError> {
        let text = fs::read_to_string(path).map_err(|source| ConfigError::Read {
            path: path.to_owned(),
            source,
        })?;
        let config = PipelineConfig::from_toml(&text).map_err(|message| ConfigError::Parse {
            path: path.to_owned(),
            message,
        })?;
        let base_dir = path
            .parent()
            .map(Path::to_path_buf)
            .unwrap_or_else(|| PathBuf::from("."));
        Ok(Self::new(config, base_dir))
    }

    pub fn apply_overrides<'a>(
        &mut self,
        entries: impl IntoIterator<Item = &'a str>,
    ) -> Result<(), ConfigError> {
        for e in entries {
            self.config.apply_override(e)?;
            self.overrides.push(e.to_string());
        }
        Ok(())
    }

    pub fn resolve(&self, path: &str) -> PathBuf {
        let p = Path::new(path);
        if p.is_absolute() {
            p.to_path_buf()
        } else {
            self.base_dir.join(p)
        }
    }

    pub fn output_dir(&self) -> PathBuf {
        self.resolve(&self.config.output.dir)
    }

    /// The index source with a relative local path resolved.
    pub fn index_source(&self) -> IndexSource {
        match &self.config.solar.index {
            IndexSource::Remote => IndexSource::Remote,
            IndexSource::LocalFile { path } => IndexSource::LocalFile {
                path: self.resolve(&path.to_string_lossy()),
            },
        }
    }
}

/// Pipeline settings for a corpus written by the synthetic generator into
/// the config file's directory. The minimum window sample count keeps the
/// default 60% coverage requirement at the corpus's sample rate.
pub fn synth_pipeline_config(spec: &SynthSpec) -> PipelineConfig {
    let per_window = (spec.window_seconds / spec.sample_interval_s) as usize;
    let min_samples = (per_window * DEFAULT_MIN_WINDOW_SAMPLES).div_ceil(DEFAULT_WINDOW_SECONDS as usize);
    PipelineConfig {
        input: InputConfig {
            paths: vec![format!("{ISMR_DIR}/*.ismr")],
            ..Default::default()
        },
        preprocess: PreprocessConfig {
            elevation_mask_deg: spec.elevation_mask_deg,
            window_seconds: spec.window_seconds as i64,
            min_window_samples: min_samples.max(1),
            ..Default::default()
        },
        solar: SolarConfig {
            index: IndexSource::LocalFile {
                path: PathBuf::from(SOLAR_FILE),
            },
            kp_scale: KpScale::Tenths,
        },
        output: OutputConfig {
            dir: "results".into(),
        },
        ..Default::default()
    }
}
