use std::fs;
use std::path::PathBuf;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand};

use scint_cli::config::{LoadedConfig, PipelineConfig};
use scint_cli::pipeline::{Pipeline, MODEL_FILE};
use scint_cli::synth_pipeline_config;
use scint_core::models::ModelFile;
use scint_core::preprocess::Dataset;
use scint_core::synth::{generate, SynthSpec};

/// Scintillation severity forecasting from ISMR receiver logs.
#[derive(Parser)]
#[command(name = "scint", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct ConfigArgs {
    /// Pipeline config file (TOML). Defaults apply when omitted.
    #[arg(short, long)]
    config: Option<PathBuf>,
    /// Override a config field, e.g. `--set preprocess.per_class=500`.
    #[arg(long = "set", value_name = "KEY=VALUE")]
    set: Vec<String>,
    /// Output directory, overriding `output.dir`.
    #[arg(short, long)]
    output_dir: Option<PathBuf>,
}

#[derive(Args)]
struct DatasetArg {
    /// Use a dataset CSV from an earlier run instead of rebuilding it.
    #[arg(long)]
    dataset: Option<PathBuf>,
}

#[derive(Subcommand)]
enum Command {
    /// Parse inputs and write the ingest report.
    Ingest(ConfigArgs),
    /// Build the balanced feature dataset.
    Preprocess(ConfigArgs),
    /// Split, optionally grid-search, and fit the model.
    Train {
        #[command(flatten)]
        config: ConfigArgs,
        #[command(flatten)]
        data: DatasetArg,
    },
    /// Score a saved model on the test split.
    Evaluate {
        #[command(flatten)]
        config: ConfigArgs,
        #[command(flatten)]
        data: DatasetArg,
        /// Model file; defaults to the one in the output directory.
        #[arg(long)]
        model: Option<PathBuf>,
    },
    /// Cross-validate every candidate in the config's grid.
    GridSearch {
        #[command(flatten)]
        config: ConfigArgs,
        #[command(flatten)]
        data: DatasetArg,
    },
    /// Write a synthetic corpus plus a pipeline config for it.
    Synth {
        /// Destination directory.
        #[arg(long)]
        out: PathBuf,
        /// Generator settings (TOML). Defaults apply when omitted.
        #[arg(long)]
        spec: Option<PathBuf>,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        days: Option<u32>,
    },
    /// Run every stage and write all artifacts.
    Run(ConfigArgs),
}

fn load_config(args: &ConfigArgs) -> Result<LoadedConfig> {
    let mut loaded = match &args.config {
        Some(path) => LoadedConfig::load(path)?,
        None => LoadedConfig::new(PipelineConfig::default(), "."),
    };
    loaded.apply_overrides(args.set.iter().map(String::as_str))?;
    if let Some(dir) = &args.output_dir {
        let entry = format!("output.dir={:?}", dir.to_string_lossy());
        loaded.apply_overrides([entry.as_str()])?;
    }
    Ok(loaded)
}

fn dataset(pipeline: &mut Pipeline, arg: &DatasetArg) -> Result<Dataset> {
    Ok(match &arg.dataset {
        Some(path) => pipeline.load_dataset(path)?,
        None => {
            let (data, report) = pipeline.build_dataset()?;
            pipeline.write_ingest_report(&report)?;
            pipeline.write_dataset(&data)?;
            data
        }
    })
}

fn main() -> Result<()> {
    let cli = Cli::parse();
    match cli.command {
        Command::Ingest(args) => {
            let mut p = Pipeline::new(load_config(&args)?)?;
            let out = p.ingest()?;
            p.write_ingest_report(&out.report)?;
            println!(
                "{} lines, {} records, {} errors, {} observations kept",
                out.report.lines_read,
                out.report.records_ok,
                out.report.error_count(),
                out.observations.len()
            );
            p.finish()?;
        }
        Command::Preprocess(args) => {
            let mut p = Pipeline::new(load_config(&args)?)?;
            let (data, report) = p.build_dataset()?;
            p.write_ingest_report(&report)?;
            p.write_dataset(&data)?;
            println!("dataset: {} rows, class counts {:?}", data.n_rows(), data.class_counts());
            p.finish()?;
        }
        Command::Train { config, data } => {
            let mut p = Pipeline::new(load_config(&config)?)?;
            let d = dataset(&mut p, &data)?;
            let (train, _) = p.split(&d)?;
            let model = p.select_and_train(&train)?;
            p.write_model(&model)?;
            println!("trained {} on {} rows", model.model.name(), train.n_rows());
            p.finish()?;
        }
        Command::Evaluate {
            config,
            data,
            model,
        } => {
            let mut p = Pipeline::new(load_config(&config)?)?;
            let model_path = model.unwrap_or_else(|| p.output_dir().join(MODEL_FILE));
            let model = ModelFile::load(&model_path)
                .with_context(|| format!("loading {}", model_path.display()))?;
            let d = dataset(&mut p, &data)?;
            let (train, test) = p.split(&d)?;
            let report = p.evaluate(&model, &test)?;
            p.write_eval(&model, train.n_rows(), &report)?;
            println!("accuracy {:.4} on {} test rows", report.accuracy, test.n_rows());
            p.finish()?;
        }
        Command::GridSearch { config, data } => {
            let mut p = Pipeline::new(load_config(&config)?)?;
            if p.config().grid.is_none() {
                bail!("the config has no [grid] section");
            }
            let d = dataset(&mut p, &data)?;
            let (train, _) = p.split(&d)?;
            let result = p.search(&train)?.expect("grid present");
            p.write_grid(&result)?;
            let best = result.best_candidate();
            println!(
                "best candidate {} {} mean accuracy {:?}",
                best.index,
                serde_json::to_string(&best.params)?,
                best.mean_accuracy
            );
            p.finish()?;
        }
        Command::Synth {
            out,
            spec,
            seed,
            days,
        } => {
            let mut s: SynthSpec = match spec {
                Some(path) => toml::from_str(&fs::read_to_string(&path)?)
                    .with_context(|| format!("parsing {}", path.display()))?,
                None => SynthSpec::default(),
            };
            if let Some(seed) = seed {
                s.seed = seed;
            }
            if let Some(days) = days {
                s.days = days;
            }
            let manifest = generate(&s, &out)?;
            let config = synth_pipeline_config(&s);
            fs::write(out.join("pipeline.toml"), config.to_toml())?;
            println!(
                "wrote {} files, {} records, windows per class {:?}",
                manifest.ismr_files.len(),
                manifest.records_written,
                manifest.window_class_counts
            );
        }
        Command::Run(args) => {
            let summary = Pipeline::new(load_config(&args)?)?.run()?;
            println!(
                "{}: {} rows, {} test accuracy {:.4}, artifacts in {}",
                summary.model,
                summary.dataset_rows,
                summary.report.matrix.total(),
                summary.report.accuracy,
                summary.output_dir.display()
            );
        }
    }
    Ok(())
}
