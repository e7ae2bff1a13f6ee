//! Command-line front end for the `tsr` toolkit.
//!
//! [`run`] parses arguments, dispatches a subcommand and maps the outcome to
//! an exit status: 0 on success, 1 on validation failure, 2 on I/O error.

use std::ffi::OsString;
use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};

pub mod commands;
pub mod config;
pub mod io;

pub use config::RunConfig;

pub const EXIT_OK: i32 = 0;
pub const EXIT_VALIDATION: i32 = 1;
pub const EXIT_IO: i32 = 2;

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("{0}")]
    Validation(String),
    #[error("{0}")]
    Io(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Validation(_) => EXIT_VALIDATION,
            CliError::Io(_) => EXIT_IO,
        }
    }
}

impl From<tsr_core::Error> for CliError {
    fn from(e: tsr_core::Error) -> Self {
        CliError::Validation(e.to_string())
    }
}

#[derive(Debug, Parser)]
#[command(
    name = "tsr",
    version,
    about = "Detection components: augmentation, anchors, evaluation, gradient checks, benchmarks"
)]
pub struct Cli {
    /// Flat JSON run configuration.
    #[arg(long, global = true, value_name = "PATH")]
    pub config: Option<PathBuf>,
    /// Master seed, overriding the configuration.
    #[arg(long, global = true, value_name = "N")]
    pub seed: Option<u64>,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Mosaic, MixUp, photometric jitter and noise over a dataset directory.
    Augment(AugmentArgs),
    /// K-means anchors from a label directory.
    Anchors(AnchorsArgs),
    /// Compare prediction labels with ground truth.
    Eval(EvalArgs),
    /// Finite-difference check of every analytic gradient.
    Gradcheck(GradcheckArgs),
    /// Throughput of each block at the detection-layer resolutions.
    Bench(BenchArgs),
    /// Write a synthetic dataset.
    Synth(SynthArgs),
}

#[derive(Debug, Args)]
pub struct AugmentArgs {
    #[arg(long = "in", value_name = "DIR")]
    pub input: PathBuf,
    #[arg(long, value_name = "DIR")]
    pub out: PathBuf,
    /// Number of outputs; defaults to the number of inputs.
    #[arg(long)]
    pub count: Option<usize>,
    /// Replay a previous run: take seed and configuration from its manifest
    /// and fail unless inputs and outputs match the recorded hashes.
    #[arg(long, value_name = "PATH")]
    pub from_manifest: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct AnchorsArgs {
    #[arg(long, value_name = "DIR")]
    pub labels: PathBuf,
    #[arg(long)]
    pub k: Option<usize>,
    #[arg(long, value_name = "FILE")]
    pub out: PathBuf,
    /// Square image side used for label files without a matching image;
    /// defaults to the configured target size.
    #[arg(long)]
    pub img_size: Option<usize>,
}

#[derive(Debug, Args)]
pub struct EvalArgs {
    #[arg(long, value_name = "DIR")]
    pub gt: PathBuf,
    #[arg(long, value_name = "DIR")]
    pub pred: PathBuf,
    #[arg(long)]
    pub iou: Option<f64>,
    #[arg(long)]
    pub conf: Option<f64>,
    #[arg(long, value_name = "FILE")]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct GradcheckArgs {
    #[arg(long)]
    pub trials: Option<usize>,
    #[arg(long, value_name = "FILE")]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct BenchArgs {
    #[arg(long)]
    pub iters: Option<usize>,
    #[arg(long)]
    pub warmup: Option<usize>,
    #[arg(long)]
    pub channels: Option<usize>,
    #[arg(long, value_name = "FILE")]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct SynthArgs {
    #[arg(long, value_name = "DIR")]
    pub out: PathBuf,
    #[arg(long, default_value_t = 20)]
    pub count: usize,
    #[arg(long, default_value_t = 128)]
    pub width: usize,
    #[arg(long, default_value_t = 96)]
    pub height: usize,
    /// Also write jittered predictions with scores to this label directory.
    #[arg(long, value_name = "DIR")]
    pub preds: Option<PathBuf>,
}

/// Runs the CLI on `argv` (including the program name) and returns the exit
/// status.
pub fn run<I, T>(argv: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(argv) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() {
                EXIT_VALIDATION
            } else {
                EXIT_OK
            };
        }
    };
    match execute(cli) {
        Ok(()) => EXIT_OK,
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}

pub fn execute(cli: Cli) -> Result<(), CliError> {
    let mut cfg = match &cli.config {
        Some(path) => RunConfig::load(path)?,
        None => RunConfig::default(),
    };
    if let Some(seed) = cli.seed {
        cfg.augment.seed = seed;
    }
    match cli.command {
        Command::Augment(a) => commands::augment::run(&a, &cfg),
        Command::Anchors(a) => commands::anchors::run(&a, &cfg),
        Command::Eval(a) => commands::eval::run(&a, &cfg),
        Command::Gradcheck(a) => commands::gradcheck::run(&a, &cfg),
        Command::Bench(a) => commands::bench::run(&a, &cfg),
        Command::Synth(a) => commands::synth::run(&a, &cfg),
    }
}
