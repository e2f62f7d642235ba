//! `arat`: command-line front end for the ARAT item recognition pipeline.

mod commands;

use std::path::PathBuf;
use std::process::ExitCode;

use arat_core::error::ErrorKind;
use arat_core::{ChannelSet, Error};
use clap::{Args, Parser, Subcommand};

#[derive(Debug, Parser)]
#[command(name = "arat", version, about = "Recognise ARAT test items from wrist IMU recordings")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Check a manifest and its sequence files.
    Validate(DataArgs),
    /// Write a synthetic dataset.
    Synth(SynthArgs),
    /// Compute MiniROCKET features (and predictions with --model).
    Transform(TransformArgs),
    /// Fit a pipeline on a whole dataset and save it.
    Fit(RunArgs),
    /// k-fold cross-validation of one preprocessing config.
    Cv(RunArgs),
    /// Cross-validate a list of configs and rank them.
    Grid(GridArgs),
    /// Cross-validate on all data and on the shortest fraction of it.
    TruncateCv(TruncateArgs),
    /// Render confusion matrices from a report or CSV file.
    Report(ReportArgs),
}

#[derive(Debug, Clone, Args)]
pub struct DataArgs {
    /// Dataset manifest CSV.
    #[arg(long)]
    pub manifest: PathBuf,
    /// Label taxonomy CSV (defaults to the bundled one).
    #[arg(long)]
    pub taxonomy: Option<PathBuf>,
    /// Cap the junk class at the most frequent item count.
    #[arg(long)]
    pub balance_junk: bool,
    #[arg(long, default_value_t = 42)]
    pub seed: u64,
    /// Output directory.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Clone, Args)]
pub struct ConfigArgs {
    /// Preprocessing config file of `key = value` lines.
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[arg(long)]
    pub padding: Option<String>,
    #[arg(long)]
    pub filter_acc_hz: Option<String>,
    #[arg(long)]
    pub filter_gyr_hz: Option<String>,
    #[arg(long)]
    pub free_acceleration: Option<String>,
    #[arg(long)]
    pub free_angular_velocity: Option<String>,
    #[arg(long)]
    pub noise_std_acc: Option<String>,
    #[arg(long)]
    pub noise_std_gyr: Option<String>,
}

#[derive(Debug, Clone, Args)]
pub struct ModelArgs {
    /// Input streams: acc-gyro, quat or all.
    #[arg(long, default_value = "all", value_parser = parse_channels)]
    pub channels: ChannelSet,
    #[arg(long, default_value_t = 10)]
    pub folds: usize,
    #[arg(long, default_value_t = 9828)]
    pub features: usize,
    /// Deal folds per label instead of splitting one shuffled list.
    #[arg(long)]
    pub stratified: bool,
}

#[derive(Debug, Clone, Args)]
pub struct RunArgs {
    #[command(flatten)]
    pub data: DataArgs,
    #[command(flatten)]
    pub config: ConfigArgs,
    #[command(flatten)]
    pub model: ModelArgs,
}

#[derive(Debug, Clone, Args)]
pub struct GridArgs {
    #[command(flatten)]
    pub run: RunArgs,
    /// Config list (blank-line separated blocks); defaults to the full grid.
    #[arg(long)]
    pub configs: Option<PathBuf>,
    /// Keep only the shortest fraction of sequences before the sweep.
    #[arg(long)]
    pub keep_fraction: Option<f64>,
    /// Sweep acceleration and angular-velocity cutoffs independently.
    #[arg(long)]
    pub independent_filters: bool,
}

#[derive(Debug, Clone, Args)]
pub struct TruncateArgs {
    #[command(flatten)]
    pub run: RunArgs,
    #[arg(long, default_value_t = 0.75)]
    pub keep_fraction: f64,
}

#[derive(Debug, Clone, Args)]
pub struct TransformArgs {
    #[command(flatten)]
    pub run: RunArgs,
    /// Directory holding a fitted pipeline; without it a transform is fitted.
    #[arg(long)]
    pub model: Option<PathBuf>,
}

#[derive(Debug, Clone, Args)]
pub struct SynthArgs {
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long, default_value_t = 5)]
    pub classes: usize,
    #[arg(long, default_value_t = 40)]
    pub per_class: usize,
    #[arg(long)]
    pub median_len: Option<f64>,
    #[arg(long)]
    pub length_sigma: Option<f64>,
    #[arg(long)]
    pub max_len: Option<usize>,
    /// Long right tail of sequence lengths.
    #[arg(long)]
    pub heavy_tail: bool,
    #[arg(long, default_value_t = 0.0)]
    pub noise_floor: f64,
    /// Narrow the frequency gaps between classes.
    #[arg(long)]
    pub hard: bool,
    /// Number of junk sequences to add.
    #[arg(long, default_value_t = 0)]
    pub junk: usize,
    #[arg(long, default_value_t = 42)]
    pub seed: u64,
}

#[derive(Debug, Clone, Args)]
pub struct ReportArgs {
    /// A `cv_report.json` file.
    #[arg(long, conflicts_with = "confusion", required_unless_present = "confusion")]
    pub report: Option<PathBuf>,
    /// A confusion matrix CSV file.
    #[arg(long)]
    pub confusion: Option<PathBuf>,
    /// Show row-normalised percentages.
    #[arg(long)]
    pub normalize: bool,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

fn parse_channels(s: &str) -> Result<ChannelSet, String> {
    s.parse().map_err(|e: Error| e.to_string())
}

pub fn exit_code(kind: ErrorKind) -> u8 {
    match kind {
        ErrorKind::Usage => 2,
        ErrorKind::Data => 3,
        ErrorKind::Runtime => 4,
    }
}

fn fail(kind: ErrorKind, message: &str) -> ExitCode {
    let name = match kind {
        ErrorKind::Usage => "usage",
        ErrorKind::Data => "data",
        ErrorKind::Runtime => "runtime",
    };
    let code = exit_code(kind);
    eprintln!(
        "{}",
        serde_json::json!({ "error": name, "exit_code": code, "message": message })
    );
    ExitCode::from(code)
}

fn configure_threads() -> Result<(), String> {
    let Ok(value) = std::env::var("RA_THREADS") else {
        return Ok(());
    };
    let n: usize = value
        .trim()
        .parse()
        .ok()
        .filter(|n| *n > 0)
        .ok_or_else(|| format!("RA_THREADS must be a positive integer, got `{value}`"))?;
    rayon::ThreadPoolBuilder::new()
        .num_threads(n)
        .build_global()
        .map_err(|e| e.to_string())
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) if !e.use_stderr() => {
            let _ = e.print();
            return ExitCode::SUCCESS;
        }
        Err(e) => {
            let text = e.to_string();
            let first = text.lines().next().unwrap_or("invalid arguments");
            return fail(ErrorKind::Usage, first.trim_start_matches("error: "));
        }
    };
    if let Err(m) = configure_threads() {
        return fail(ErrorKind::Usage, &m);
    }
    let argv: Vec<String> = std::env::args().collect();
    let result = match &cli.command {
        Command::Validate(a) => commands::validate(a, &argv),
        Command::Synth(a) => commands::synth(a, &argv),
        Command::Transform(a) => commands::transform(a, &argv),
        Command::Fit(a) => commands::fit(a, &argv),
        Command::Cv(a) => commands::cv(a, &argv),
        Command::Grid(a) => commands::grid(a, &argv),
        Command::TruncateCv(a) => commands::truncate_cv(a, &argv),
        Command::Report(a) => commands::report(a, &argv),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => fail(e.kind(), &e.to_string()),
    }
}
