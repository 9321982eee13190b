//! Command-line definitions and dispatch.

use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};

use crate::commands;
use crate::config::PipelineConfig;
use crate::error::{AppError, AppResult};
use crate::experiment::{ExperimentName, Variant};

#[derive(Debug, Parser)]
#[command(name = "facecloud", version, about = "Refine, sample and classify facial pointclouds")]
pub struct Cli {
    /// JSON pipeline configuration; flags override it.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// Root seed of every random stage.
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// Worker threads for batch stages.
    #[arg(long, global = true, default_value_t = 1)]
    pub jobs: usize,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Generate a labeled synthetic head dataset.
    Synth(SynthArgs),
    /// Crop every cloud of a dataset to its face.
    Refine(RefineArgs),
    /// Farthest-point downsample every cloud.
    Sample(SampleArgs),
    /// Keep only a coverage region of every cloud.
    Mask(MaskArgs),
    /// Train a classifier from scratch.
    Train(TrainArgs),
    /// Continue training a checkpoint on part of a dataset.
    Finetune(FinetuneArgs),
    /// Run one of the E1 to E6 protocols.
    Experiment(ExperimentArgs),
    /// Held-out accuracy under coverage masks.
    MaskEval(MaskEvalArgs),
    /// Point count to radar bandwidth table.
    Bandwidth(BandwidthArgs),
    /// Dump debug rasters and circle detections of one cloud.
    Inspect(InspectArgs),
}

#[derive(Debug, Args)]
pub struct SynthArgs {
    #[arg(long)]
    pub out: Option<PathBuf>,
    #[arg(long)]
    pub n_per_class: Option<usize>,
    #[arg(long)]
    pub n_classes: Option<usize>,
    /// Draw from the shifted population.
    #[arg(long)]
    pub shifted: bool,
    /// Keep only face-tagged points.
    #[arg(long)]
    pub face_only: bool,
    /// Symmetric yaw and pitch range, degrees.
    #[arg(long)]
    pub pose_range: Option<f64>,
    /// Featureless spheres instead of heads.
    #[arg(long)]
    pub sphere: bool,
}

#[derive(Debug, Args)]
pub struct RefineArgs {
    #[arg(long)]
    pub input: Option<PathBuf>,
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Pass the raw cloud through when refinement fails.
    #[arg(long)]
    pub fallback_raw: bool,
    /// Record stage timings in the reports.
    #[arg(long)]
    pub timings: bool,
}

#[derive(Debug, Args)]
pub struct SampleArgs {
    #[arg(long)]
    pub input: Option<PathBuf>,
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Points kept per cloud; defaults to the configured centroid count.
    #[arg(long)]
    pub points: Option<usize>,
}

#[derive(Debug, Args)]
pub struct MaskArgs {
    #[arg(long)]
    pub input: Option<PathBuf>,
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// glasses | hmd | full | box:x0,x1,y0,y1,z0,z1
    #[arg(long)]
    pub mask: Option<String>,
}

#[derive(Debug, Args)]
pub struct TrainArgs {
    #[arg(long)]
    pub data: Option<PathBuf>,
    #[arg(long)]
    pub out: Option<PathBuf>,
    #[arg(long)]
    pub epochs: Option<usize>,
    /// Stratified share held out for validation.
    #[arg(long, default_value_t = 0.2)]
    pub val_fraction: f64,
}

#[derive(Debug, Args)]
pub struct FinetuneArgs {
    #[arg(long)]
    pub model: Option<PathBuf>,
    #[arg(long)]
    pub data: Option<PathBuf>,
    #[arg(long)]
    pub out: Option<PathBuf>,
    #[arg(long, default_value_t = 0.25)]
    pub fraction: f64,
    #[arg(long, default_value_t = 15)]
    pub epochs: usize,
}

#[derive(Debug, Args)]
pub struct ExperimentArgs {
    #[arg(long, value_enum)]
    pub name: ExperimentName,
    #[arg(long, value_enum, default_value = "full")]
    pub variant: Variant,
    /// Population A.
    #[arg(long)]
    pub source: Option<PathBuf>,
    /// Population B.
    #[arg(long)]
    pub target: Option<PathBuf>,
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// E6 fine-tuning share, 0.25 or 0.1.
    #[arg(long)]
    pub fraction: Option<f64>,
    /// Training epochs; fine-tuning always runs 15.
    #[arg(long)]
    pub epochs: Option<usize>,
}

#[derive(Debug, Args)]
pub struct MaskEvalArgs {
    #[arg(long)]
    pub model: Option<PathBuf>,
    #[arg(long)]
    pub data: Option<PathBuf>,
    /// Masks separated by `;`, or repeated flags.
    #[arg(long, value_delimiter = ';')]
    pub masks: Vec<String>,
    /// Share of each class used for training; the rest is evaluated.
    #[arg(long, default_value_t = 0.0)]
    pub split_fraction: f64,
    /// FPS budget applied after masking, as in the downsampled variant.
    #[arg(long)]
    pub points: Option<usize>,
    /// Output CSV.
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct BandwidthArgs {
    #[arg(long, value_delimiter = ',', default_value = "64,128,256,512,1024")]
    pub points: Vec<usize>,
    #[arg(long)]
    pub csv: Option<PathBuf>,
    /// Face width, m.
    #[arg(long)]
    pub width: Option<f64>,
    /// Face height, m.
    #[arg(long)]
    pub height: Option<f64>,
}

#[derive(Debug, Args)]
pub struct InspectArgs {
    /// A .ply or .csv cloud.
    #[arg(long)]
    pub input: PathBuf,
    #[arg(long)]
    pub out: PathBuf,
    /// Circles listed per projection.
    #[arg(long, default_value_t = 10)]
    pub top: usize,
}

/// Resolved configuration handed to every command.
#[derive(Debug, Clone)]
pub struct Context {
    pub cfg: PipelineConfig,
    pub digest: String,
}

impl Context {
    fn new(cli: &Cli) -> AppResult<Self> {
        let mut cfg = PipelineConfig::load(cli.config.as_deref())?;
        if let Some(s) = cli.seed {
            cfg.seed = s;
        }
        let digest = cfg.digest();
        Ok(Context { cfg, digest })
    }

    /// Recomputes the digest after flag overrides.
    pub fn refresh(&mut self) {
        self.digest = self.cfg.digest();
    }

    pub fn comment(&self) -> String {
        format!("config {}", self.digest)
    }
}

/// First of `flag` and `fallback`, or a config error naming `what`.
pub fn required(flag: &Option<PathBuf>, fallback: &Option<PathBuf>, what: &str) -> AppResult<PathBuf> {
    flag.clone()
        .or_else(|| fallback.clone())
        .ok_or_else(|| AppError::Config(format!("missing `{what}` (flag or paths.{what} in the config)")))
}

pub fn run(cli: Cli) -> AppResult<()> {
    if cli.jobs == 0 {
        return Err(AppError::Config("`jobs` must be at least 1".into()));
    }
    let ctx = Context::new(&cli)?;
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(cli.jobs)
        .build()
        .map_err(|e| AppError::Config(format!("thread pool: {e}")))?;
    pool.install(|| match &cli.command {
        Command::Synth(a) => commands::synth::run(ctx, a),
        Command::Refine(a) => commands::refine::run(ctx, a),
        Command::Sample(a) => commands::sample::run_sample(ctx, a),
        Command::Mask(a) => commands::sample::run_mask(ctx, a),
        Command::Train(a) => commands::train::run_train(ctx, a),
        Command::Finetune(a) => commands::train::run_finetune(ctx, a),
        Command::Experiment(a) => commands::experiment::run(ctx, a),
        Command::MaskEval(a) => commands::mask_eval::run(ctx, a),
        Command::Bandwidth(a) => commands::bandwidth::run(ctx, a),
        Command::Inspect(a) => commands::inspect::run(ctx, a),
    })
}
