//! Command-line front end. `run` parses arguments, executes one subcommand
//! and maps failures to exit codes.

use std::fs;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use log::info;
use serde::{Deserialize, Serialize};

use crate::config::{load_config, render_config};
use crate::datamodel::{self, NgsimColumns, NgsimOptions, RoadGeometry};
use crate::error::{Error, Result};
use crate::evaluation::{self, MetricOptions, PredictionRecord};
use crate::features::{build_samples, SampleOptions};
use crate::model::{load_checkpoint, save_checkpoint};
use crate::simulator::{generate_dataset, SimConfig};
use crate::training::{train, write_history, TrainConfig};

pub const EXIT_FAILURE: i32 = 1;
pub const EXIT_MISSING_FILE: i32 = 2;
pub const EXIT_VERSION: i32 = 3;
pub const EXIT_CONFIG: i32 = 4;
pub const EXIT_USAGE: i32 = 64;

pub const SCENES_FILE: &str = "scenes.csv";
pub const DATASET_FILE: &str = "dataset.vbd";
pub const CONFIG_FILE: &str = "config.toml";
pub const CHECKPOINT_FILE: &str = "model.vbck";
pub const HISTORY_FILE: &str = "history.csv";
pub const REPORT_TABLE_FILE: &str = "metrics.tsv";
pub const REPORT_KV_FILE: &str = "metrics.toml";
pub const NLL_FILE: &str = "nll_by_ttlc.csv";
pub const DISTRIBUTION_FILE: &str = "prediction_distribution.csv";

#[derive(Parser, Debug)]
#[command(name = "vbin", version, about = "Interaction-aware lane-change prediction")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Debug)]
struct ConfigArgs {
    /// TOML file of `key = value` settings.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Override one setting, e.g. `--set epochs=20`; repeatable.
    #[arg(long = "set", value_name = "KEY=VALUE")]
    overrides: Vec<String>,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Simulate highway scenes and label them into a dataset.
    Simulate {
        #[command(flatten)]
        cfg: ConfigArgs,
        #[arg(long)]
        seed: Option<u64>,
        /// Output directory.
        #[arg(long)]
        out: PathBuf,
    },
    /// Convert an NGSIM-style trajectory file into a scene file.
    Ingest {
        input: PathBuf,
        #[command(flatten)]
        cfg: ConfigArgs,
        /// `key=header` pairs, inline or in a file.
        #[arg(long)]
        column_map: Option<String>,
        #[arg(long)]
        out: PathBuf,
    },
    /// Label a scene file into a dataset.
    BuildSamples {
        /// Scene file.
        input: PathBuf,
        #[command(flatten)]
        cfg: ConfigArgs,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        out: PathBuf,
    },
    /// Train a model; writes checkpoint, history and resolved config.
    Train {
        #[arg(long)]
        dataset: PathBuf,
        #[command(flatten)]
        cfg: ConfigArgs,
        #[arg(long)]
        seed: Option<u64>,
        /// Output directory.
        #[arg(long)]
        out: PathBuf,
    },
    /// Compute the metric report from a dataset and checkpoint, or from a
    /// prediction file.
    Evaluate {
        #[arg(long, required_unless_present = "predictions")]
        dataset: Option<PathBuf>,
        #[arg(long, requires = "dataset")]
        checkpoint: Option<PathBuf>,
        /// Per-frame predictions as written by `predict`.
        #[arg(long, conflicts_with_all = ["dataset", "checkpoint"])]
        predictions: Option<PathBuf>,
        #[command(flatten)]
        cfg: ConfigArgs,
        #[arg(long)]
        bin_width: Option<f64>,
        /// Output directory.
        #[arg(long)]
        out: PathBuf,
    },
    /// Write per-frame class likelihoods.
    Predict {
        #[arg(long)]
        dataset: PathBuf,
        #[arg(long)]
        checkpoint: PathBuf,
        /// Output CSV file.
        #[arg(long)]
        out: PathBuf,
    },
    /// NLL-vs-TTLC and prediction-distribution CSVs from a prediction file.
    EmitPlots {
        /// Prediction file written by `predict`.
        input: PathBuf,
        #[arg(long)]
        bin_width: Option<f64>,
        /// Output directory.
        #[arg(long)]
        out: PathBuf,
    },
}

#[derive(Clone, Debug, Serialize, Deserialize, PartialEq)]
#[serde(default, deny_unknown_fields)]
pub struct SimulateConfig {
    pub scenes: usize,
    pub simulation: SimConfig,
}

impl Default for SimulateConfig {
    fn default() -> Self {
        SimulateConfig {
            scenes: 2,
            simulation: SimConfig::default(),
        }
    }
}

#[derive(Clone, Debug, Serialize, Deserialize, PartialEq)]
#[serde(default, deny_unknown_fields)]
pub struct IngestConfig {
    pub lane_count: usize,
    pub lane_width: f64,
    pub unit_scale: f64,
    pub lane_base: i32,
    pub smoothing_window: usize,
    pub delimiter: char,
    pub scene_id: u32,
}

impl Default for IngestConfig {
    fn default() -> Self {
        IngestConfig {
            lane_count: 6,
            lane_width: 12.0 * 0.3048,
            unit_scale: 0.3048,
            lane_base: 1,
            smoothing_window: 5,
            delimiter: ',',
            scene_id: 0,
        }
    }
}

#[derive(Clone, Debug, Serialize, Deserialize, PartialEq)]
#[serde(default, deny_unknown_fields)]
pub struct SampleConfig {
    pub lk_events_per_lc: f64,
    pub seed: u64,
}

impl Default for SampleConfig {
    fn default() -> Self {
        let d = SampleOptions::default();
        SampleConfig {
            lk_events_per_lc: d.lk_events_per_lc,
            seed: d.seed,
        }
    }
}

#[derive(Clone, Debug, Serialize, Deserialize, PartialEq)]
#[serde(default, deny_unknown_fields)]
pub struct EvalConfig {
    pub wrong_direction_is_fp: bool,
    pub exclude_unpredicted_events: bool,
    pub bin_width: f64,
    pub batch_size: usize,
}

impl Default for EvalConfig {
    fn default() -> Self {
        let d = MetricOptions::default();
        EvalConfig {
            wrong_direction_is_fp: d.wrong_direction_is_fp,
            exclude_unpredicted_events: d.exclude_unpredicted_events,
            bin_width: d.bin_width,
            batch_size: 256,
        }
    }
}

/// Exit code for an error: 2 missing file, 3 format version, 4 config, 1 otherwise.
pub fn exit_code(e: &Error) -> i32 {
    match e {
        Error::File { source, .. } if source.kind() == std::io::ErrorKind::NotFound => EXIT_MISSING_FILE,
        Error::Io(source) if source.kind() == std::io::ErrorKind::NotFound => EXIT_MISSING_FILE,
        Error::Version { .. } => EXIT_VERSION,
        Error::Config(_) => EXIT_CONFIG,
        _ => EXIT_FAILURE,
    }
}

/// Runs one command; `argv[0]` is the program name. Log level comes from
/// `VBIN_LOG` (default `info`).
pub fn run<I, S>(argv: I) -> i32
where
    I: IntoIterator<Item = S>,
    S: Into<std::ffi::OsString> + Clone,
{
    let _ = env_logger::Builder::from_env(env_logger::Env::new().filter_or("VBIN_LOG", "info"))
        .format_timestamp(None)
        .try_init();
    let cli = match Cli::try_parse_from(argv) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_USAGE } else { 0 };
            let _ = e.print();
            return code;
        }
    };
    match execute(cli.command) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {}", e);
            exit_code(&e)
        }
    }
}

fn resolve<T>(cfg: &ConfigArgs, extra: Vec<String>, what: &str) -> Result<T>
where
    T: serde::de::DeserializeOwned + Serialize,
{
    let mut overrides = cfg.overrides.clone();
    overrides.extend(extra);
    let resolved: T = load_config(cfg.config.as_deref(), &overrides)?;
    info!("{} config:\n{}", what, render_config(&resolved).trim_end());
    Ok(resolved)
}

fn seed_override(key: &str, seed: Option<u64>) -> Vec<String> {
    seed.map(|s| format!("{}={}", key, s)).into_iter().collect()
}

fn create_dir(dir: &Path) -> Result<()> {
    fs::create_dir_all(dir).map_err(|e| Error::file(dir, e))
}

fn write_file(path: &Path, bytes: impl AsRef<[u8]>) -> Result<()> {
    fs::write(path, bytes).map_err(|e| Error::file(path, e))
}

fn create_file(path: &Path) -> Result<std::io::BufWriter<fs::File>> {
    let f = fs::File::create(path).map_err(|e| Error::file(path, e))?;
    Ok(std::io::BufWriter::new(f))
}

fn open_file(path: &Path) -> Result<fs::File> {
    fs::File::open(path).map_err(|e| Error::file(path, e))
}

fn execute(command: Command) -> Result<()> {
    match command {
        Command::Simulate { cfg, seed, out } => {
            let c: SimulateConfig = resolve(&cfg, seed_override("simulation.seed", seed), "simulate")?;
            let data = generate_dataset(&c.simulation, c.scenes, c.simulation.seed)?;
            create_dir(&out)?;
            datamodel::save_scenes(&data.scenes, out.join(SCENES_FILE))?;
            datamodel::save_dataset(&data.samples, out.join(DATASET_FILE))?;
            write_file(&out.join(CONFIG_FILE), render_config(&c))?;
            info!("wrote {} samples to {}", data.samples.len(), out.display());
        }
        Command::Ingest { input, cfg, column_map, out } => {
            let c: IngestConfig = resolve(&cfg, Vec::new(), "ingest")?;
            let columns = match column_map {
                Some(m) if Path::new(&m).is_file() => {
                    let text = fs::read_to_string(&m).map_err(|e| Error::file(&m, e))?;
                    NgsimColumns::parse(&text)?
                }
                Some(m) => NgsimColumns::parse(&m)?,
                None => NgsimColumns::default(),
            };
            if !c.delimiter.is_ascii() {
                return Err(Error::Config(format!("delimiter `{}` is not ASCII", c.delimiter)));
            }
            let options = NgsimOptions {
                delimiter: c.delimiter as u8,
                columns,
                road: RoadGeometry::new(c.lane_count, c.lane_width).map_err(|e| Error::Config(e.to_string()))?,
                unit_scale: c.unit_scale,
                lane_base: c.lane_base,
                smoothing_window: c.smoothing_window,
            };
            let scene = datamodel::ingest_ngsim(&input, &options)?;
            info!("ingested {} vehicles", scene.vehicle_count());
            datamodel::save_scenes(&[(c.scene_id, scene)], &out)?;
        }
        Command::BuildSamples { input, cfg, seed, out } => {
            let c: SampleConfig = resolve(&cfg, seed_override("seed", seed), "build-samples")?;
            let scenes = datamodel::load_scenes(&input)?;
            let mut samples = Vec::new();
            for (id, scene) in &scenes {
                let opts = SampleOptions {
                    lk_events_per_lc: c.lk_events_per_lc,
                    seed: crate::simulator::scene_seed(c.seed, *id),
                };
                samples.extend(build_samples(scene, *id, &opts)?);
            }
            info!("built {} samples from {} scenes", samples.len(), scenes.len());
            datamodel::save_dataset(&samples, &out)?;
        }
        Command::Train { dataset, cfg, seed, out } => {
            let c: TrainConfig = resolve(&cfg, seed_override("seed", seed), "train")?;
            let samples = datamodel::load_dataset(&dataset)?;
            let outcome = train(&samples, &c)?;
            create_dir(&out)?;
            save_checkpoint(&outcome.checkpoint, out.join(CHECKPOINT_FILE))?;
            write_history(&outcome.history, create_file(&out.join(HISTORY_FILE))?)?;
            write_file(&out.join(CONFIG_FILE), render_config(&c))?;
            info!("best epoch {}; wrote {}", outcome.best_epoch, out.display());
        }
        Command::Evaluate {
            dataset,
            checkpoint,
            predictions,
            cfg,
            bin_width,
            out,
        } => {
            let extra = bin_width.map(|w| format!("bin_width={}", w)).into_iter().collect();
            let c: EvalConfig = resolve(&cfg, extra, "evaluate")?;
            let records = match (predictions, dataset, checkpoint) {
                (Some(p), _, _) => evaluation::read_records(open_file(&p)?)?,
                (None, Some(d), Some(ck)) => predict_records(&d, &ck, c.batch_size)?,
                _ => return Err(Error::Config("evaluate needs --checkpoint with --dataset".into())),
            };
            let options = MetricOptions {
                wrong_direction_is_fp: c.wrong_direction_is_fp,
                exclude_unpredicted_events: c.exclude_unpredicted_events,
                bin_width: c.bin_width,
            };
            let report = evaluation::evaluate_records(&records, &options)?;
            create_dir(&out)?;
            evaluation::write_report_table(&report, create_file(&out.join(REPORT_TABLE_FILE))?)?;
            evaluation::write_report_kv(&report, create_file(&out.join(REPORT_KV_FILE))?)?;
            evaluation::write_bins_csv(&report.bins, create_file(&out.join(NLL_FILE))?)?;
            write_file(&out.join(CONFIG_FILE), render_config(&c))?;
            let show = |v: Option<f64>| v.map_or("undefined".to_string(), |v| format!("{:.4}", v));
            info!(
                "precision {} recall {} f1 {} critical FN {} FP {} prediction time {}",
                show(report.accuracy.precision),
                show(report.accuracy.recall),
                show(report.accuracy.f1),
                report.critical_fn,
                report.critical_fp,
                show(report.average_prediction_time),
            );
        }
        Command::Predict { dataset, checkpoint, out } => {
            let records = predict_records(&dataset, &checkpoint, EvalConfig::default().batch_size)?;
            evaluation::write_records(&records, create_file(&out)?)?;
            info!("wrote {} predictions to {}", records.len(), out.display());
        }
        Command::EmitPlots { input, bin_width, out } => {
            let width = bin_width.unwrap_or(MetricOptions::default().bin_width);
            let records = evaluation::read_records(open_file(&input)?)?;
            let bins = evaluation::nll_vs_ttlc(&records, width)?;
            create_dir(&out)?;
            evaluation::write_bins_csv(&bins, create_file(&out.join(NLL_FILE))?)?;
            evaluation::write_distribution_csv(&bins, create_file(&out.join(DISTRIBUTION_FILE))?)?;
        }
    }
    Ok(())
}

fn predict_records(dataset: &Path, checkpoint: &Path, chunk: usize) -> Result<Vec<PredictionRecord>> {
    let ckpt = load_checkpoint(checkpoint)?;
    info!("checkpoint {} model, trained with:\n{}", ckpt.model.kind().name(), ckpt.config_echo.trim_end());
    let samples = datamodel::load_dataset(dataset)?;
    let probs = ckpt.model.predict(&samples, chunk.max(1))?;
    evaluation::records_from(&samples, &probs)
}
