//! `crosspkg` command-line entry point.

mod commands;
mod error;

use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};
use crosspkg::models::ModelKind;
use crosspkg::tuning::Strategy;
use crosspkg::Ecosystem;

use error::{CliError, EX_OK, EX_USAGE};

#[derive(Debug, Parser)]
#[command(name = "crosspkg", version, about = "Cross-ecosystem malicious package detection for npm and PyPI")]
pub struct Cli {
    #[command(flatten)]
    pub global: GlobalOpts,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Args)]
pub struct GlobalOpts {
    /// Feature schema JSON (default: built-in 132-slot schema).
    #[arg(long, global = true)]
    pub schema: Option<PathBuf>,
    /// Sensitive-keyword dictionary, one keyword per line (default: built-in seed).
    #[arg(long, global = true)]
    pub dictionary: Option<PathBuf>,
    /// Seed for every random choice of the invocation.
    #[arg(long, global = true, default_value_t = 0)]
    pub seed: u64,
    /// More log output (-v info, -vv debug).
    #[arg(short, long, global = true, action = clap::ArgAction::Count)]
    pub verbose: u8,
    /// Errors only.
    #[arg(short, long, global = true)]
    pub quiet: bool,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Extract feature vectors from one archive or a directory of archives.
    Extract(ExtractArgs),
    /// Build a labeled dataset from benign and malicious corpus trees.
    BuildDataset(BuildDatasetArgs),
    /// Train a model on a labeled feature CSV.
    Train(TrainArgs),
    /// Repeated stratified k-fold evaluation of a learner.
    Evaluate(EvaluateArgs),
    /// Search hyperparameters maximizing mean CV precision.
    Tune(TuneArgs),
    /// Classify local archives, or run one pass over configured feeds.
    Scan(ScanArgs),
    /// Poll configured feeds until interrupted.
    Watch(WatchArgs),
    /// Per-model counts over scan sinks.
    Report(ReportArgs),
    /// Print the feature schema or its hash.
    Schema(SchemaArgs),
    /// Write a seeded synthetic corpus tree.
    Synth(SynthArgs),
}

#[derive(Debug, Args)]
pub struct ExtractArgs {
    /// Archive file or directory (searched recursively).
    pub input: PathBuf,
    #[arg(long, short = 'e')]
    pub ecosystem: Ecosystem,
    /// Output CSV (default: stdout).
    #[arg(long, short = 'o')]
    pub output: Option<PathBuf>,
    /// Label column for every row: 0, 1 or - (unlabeled).
    #[arg(long, default_value = "-")]
    pub label: String,
}

#[derive(Debug, Args)]
pub struct BuildDatasetArgs {
    /// Benign corpus root (`<ecosystem>/<name>/<version>/<archive>`).
    #[arg(long, required_unless_present = "merge")]
    pub benign: Option<PathBuf>,
    /// Malicious corpus root, same layout.
    #[arg(long, required_unless_present = "merge")]
    pub malicious: Option<PathBuf>,
    /// Tab-separated `name<TAB>campaign` map for the malicious corpus.
    #[arg(long)]
    pub campaigns: Option<PathBuf>,
    /// Benign share of the assembled dataset.
    #[arg(long, default_value_t = 0.9)]
    pub ratio: f64,
    /// Keep every malicious sample.
    #[arg(long)]
    pub no_dedup: bool,
    /// Merge existing dataset CSVs instead of building.
    #[arg(long, num_args = 2.., conflicts_with_all = ["benign", "malicious"])]
    pub merge: Vec<PathBuf>,
    /// Also write per-feature distribution statistics.
    #[arg(long)]
    pub distribution: Option<PathBuf>,
    #[arg(long, short = 'o')]
    pub output: PathBuf,
}

#[derive(Debug, Args)]
pub struct LearnerArgs {
    /// dt, rf or gbt.
    #[arg(long, short = 'l', default_value = "gbt")]
    pub learner: ModelKind,
    /// Hyperparameter JSON, either tagged with `kind` or the learner's fields.
    #[arg(long)]
    pub hp: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct CvArgs {
    #[arg(long, short = 'k', default_value_t = 5)]
    pub k: usize,
    #[arg(long, default_value_t = 10)]
    pub repeats: usize,
}

#[derive(Debug, Args)]
pub struct TrainArgs {
    #[arg(long, short = 'd')]
    pub dataset: PathBuf,
    #[command(flatten)]
    pub learner: LearnerArgs,
    /// Probability above which a package is labeled malicious.
    #[arg(long, default_value_t = 0.5)]
    pub threshold: f64,
    #[arg(long, short = 'o')]
    pub output: PathBuf,
}

#[derive(Debug, Args)]
pub struct EvaluateArgs {
    #[arg(long, short = 'd')]
    pub dataset: PathBuf,
    #[command(flatten)]
    pub learner: LearnerArgs,
    #[command(flatten)]
    pub cv: CvArgs,
    /// Add one row per ecosystem slice of the held-out folds.
    #[arg(long)]
    pub by_ecosystem: bool,
    /// Also write the result as JSON.
    #[arg(long)]
    pub json: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct TuneArgs {
    #[arg(long, short = 'd')]
    pub dataset: PathBuf,
    #[arg(long, short = 'l', default_value = "gbt")]
    pub learner: ModelKind,
    /// Search space JSON (default: built-in space for the learner).
    #[arg(long)]
    pub space: Option<PathBuf>,
    #[arg(long, default_value_t = 30)]
    pub budget: usize,
    #[arg(long, default_value = "smbo")]
    pub strategy: Strategy,
    #[command(flatten)]
    pub cv: CvArgs,
    /// Trial log (JSON lines).
    #[arg(long)]
    pub trials: Option<PathBuf>,
    /// Best hyperparameters as JSON.
    #[arg(long, short = 'o')]
    pub output: PathBuf,
}

#[derive(Debug, Args)]
pub struct ScanArgs {
    /// Archives to classify; without any, one pass over the configured feeds.
    pub archives: Vec<PathBuf>,
    /// Ecosystem of the given archives.
    #[arg(long, short = 'e', requires = "archives")]
    pub ecosystem: Option<Ecosystem>,
    /// Model file; repeatable. Overrides the config's models.
    #[arg(long, short = 'm')]
    pub model: Vec<PathBuf>,
    /// Scanner config (default: $CROSSPKG_CONFIG, then ./crosspkg.toml).
    #[arg(long, short = 'c')]
    pub config: Option<PathBuf>,
    /// Verdict output for archive mode (default: stdout).
    #[arg(long, short = 'o')]
    pub output: Option<PathBuf>,
    /// Fixed verdict timestamp (RFC 3339) for reproducible output.
    #[arg(long)]
    pub now: Option<String>,
    #[arg(long, default_value_t = 10)]
    pub top: usize,
}

#[derive(Debug, Args)]
pub struct WatchArgs {
    #[arg(long, short = 'c')]
    pub config: Option<PathBuf>,
    #[arg(long, short = 'm')]
    pub model: Vec<PathBuf>,
    /// Poll every source once, drain and exit.
    #[arg(long)]
    pub once: bool,
    /// Run id used in the sink file name.
    #[arg(long)]
    pub run_id: Option<String>,
    #[arg(long)]
    pub now: Option<String>,
}

#[derive(Debug, Args)]
pub struct ReportArgs {
    /// Sink files (`scan-*.jsonl`).
    pub sinks: Vec<PathBuf>,
    /// Print JSON instead of a table.
    #[arg(long)]
    pub json: bool,
}

#[derive(Debug, Args)]
pub struct SchemaArgs {
    /// Print only the schema hash.
    #[arg(long)]
    pub hash: bool,
    #[arg(long, short = 'o')]
    pub output: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct SynthArgs {
    #[arg(long, short = 'e')]
    pub ecosystem: Ecosystem,
    #[arg(long, default_value_t = 900)]
    pub benign: usize,
    #[arg(long, default_value_t = 100)]
    pub malicious: usize,
    /// Output root; gets `benign/` and `malicious/` trees.
    #[arg(long, short = 'o')]
    pub output: PathBuf,
    /// Also drop every archive flat into this directory (a local feed).
    #[arg(long)]
    pub flat: Option<PathBuf>,
}

fn init_logging(g: &GlobalOpts) {
    let level = if g.quiet {
        log::LevelFilter::Error
    } else {
        match g.verbose {
            0 => log::LevelFilter::Warn,
            1 => log::LevelFilter::Info,
            _ => log::LevelFilter::Debug,
        }
    };
    let _ = env_logger::Builder::new().filter_level(level).format_timestamp(None).target(env_logger::Target::Stderr).try_init();
}

fn main() {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let code = match e.kind() {
                clap::error::ErrorKind::DisplayHelp | clap::error::ErrorKind::DisplayVersion => EX_OK,
                _ => EX_USAGE,
            };
            let _ = e.print();
            std::process::exit(code);
        }
    };
    init_logging(&cli.global);
    let code = match commands::run(&cli) {
        Ok(code) => code,
        Err(CliError { code, message }) => {
            eprintln!("error: {message}");
            code
        }
    };
    std::process::exit(code);
}
