//! `pedcross` command-line tool.
//!
//! Exit codes: 0 success, 1 experiment or validation failure, 2 usage,
//! configuration or I/O error.

mod commands;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use pedcross::evaluation::Target;
use pedcross::models::ModelFamily;
use pedcross::FeatureSet;

#[derive(Debug, Parser)]
#[command(
    name = "pedcross",
    version,
    about = "Pedestrian crossing behavior prediction pipeline"
)]
pub struct Cli {
    /// Seed for every random stream of the command (generator, folds, models).
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// Output file (generate, ingest) or output directory (other commands).
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,
    /// Generator config file (TOML, or JSON by extension).
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// Increase log verbosity (-v info, -vv debug).
    #[arg(short, long, global = true, action = clap::ArgAction::Count)]
    pub verbose: u8,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Generate a synthetic dataset in the domain CSV schema.
    Generate,
    /// Validate a domain CSV and write it back in canonical form.
    Ingest(IngestArgs),
    /// Fit one model on a whole dataset and save it.
    Train(TrainArgs),
    /// Cross-validate one model on a dataset.
    Evaluate(EvaluateArgs),
    /// Run an experiment plan (defaults to the standard eleven-cell grid).
    Run(PlanArgs),
    /// Run the feature-subset ablation for LR, RF and MLP.
    Ablate(PlanArgs),
    /// Summarise the reports found in an output directory.
    Report(ReportArgs),
}

#[derive(Debug, Args)]
pub struct IngestArgs {
    /// Input CSV in the domain schema.
    #[arg(long)]
    pub data: PathBuf,
    /// Fail (exit 1) if any row is rejected.
    #[arg(long)]
    pub strict: bool,
}

/// Where trials come from: a CSV file, or the generator when absent.
#[derive(Debug, Args)]
pub struct DataArgs {
    /// Domain CSV; without it a dataset is generated from --config/--seed.
    #[arg(long)]
    pub data: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct CellArgs {
    /// decision, cit or cd.
    #[arg(long, default_value = "decision")]
    pub task: Target,
    /// lr, svm, rf or mlp.
    #[arg(long, default_value = "mlp")]
    pub model: ModelFamily,
    /// baseline, ours, ours_delta or subset1..subset4.
    #[arg(long, default_value = "ours")]
    pub features: FeatureSet,
}

#[derive(Debug, Args)]
pub struct TrainArgs {
    #[command(flatten)]
    pub data: DataArgs,
    #[command(flatten)]
    pub cell: CellArgs,
    /// Also write the standardized design matrix to design_matrix.csv.
    #[arg(long)]
    pub dump_matrix: bool,
}

#[derive(Debug, Args)]
pub struct EvaluateArgs {
    #[command(flatten)]
    pub data: DataArgs,
    #[command(flatten)]
    pub cell: CellArgs,
    /// Number of folds.
    #[arg(long, default_value_t = 5)]
    pub k: usize,
}

#[derive(Debug, Args)]
pub struct PlanArgs {
    /// Plan file (TOML, or JSON by extension).
    #[arg(long)]
    pub plan: Option<PathBuf>,
    /// Domain CSV overriding the plan's dataset.
    #[arg(long)]
    pub data: Option<PathBuf>,
    /// Print the cells that would run and write nothing.
    #[arg(long)]
    pub dry_run: bool,
}

#[derive(Debug, Args)]
pub struct ReportArgs {
    /// Output directory of a previous run (defaults to --out, then `out`).
    pub dir: Option<PathBuf>,
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { 2 } else { 0 });
        }
    };
    let level = match cli.verbose {
        0 => log::LevelFilter::Warn,
        1 => log::LevelFilter::Info,
        _ => log::LevelFilter::Debug,
    };
    env_logger::Builder::new()
        .filter_level(level)
        .parse_default_env()
        .init();
    match commands::dispatch(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.code())
        }
    }
}
