//! `lrpca`: generate instances, train schedules, solve, benchmark and run
//! background subtraction. Every run writes `manifest.txt` into its output
//! directory; `lrpca <cmd> --config manifest.txt` repeats the run.

mod commands;
mod config;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

#[derive(Debug)]
pub enum CliError {
    /// Bad flags, config or input paths: exit code 2.
    Usage(String),
    /// Failure while running: exit code 1.
    Run(lrpca::Error),
}

impl From<lrpca::Error> for CliError {
    fn from(e: lrpca::Error) -> Self {
        Self::Run(e)
    }
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        Self::Run(e.into())
    }
}

#[derive(Parser, Debug)]
#[command(name = "lrpca", version, about = "Learned robust PCA")]
struct Cli {
    /// `key = value` config file; flags take precedence.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Falls back to the config, then LRPCA_SEED, then 0.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Output directory.
    #[arg(long, global = true)]
    out: Option<String>,
    /// Worker threads.
    #[arg(long, global = true)]
    jobs: Option<usize>,
    /// Write wall-clock columns as 0 so outputs are byte-reproducible.
    #[arg(long, global = true)]
    no_timings: bool,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Write a synthetic instance as Y.bin, X_star.bin, S_star.bin.
    Gen(GenArgs),
    /// Train a schedule: layer-wise SGD, then the tail grid search.
    Train(TrainArgs),
    /// Recover X and S from an observed matrix.
    Solve(SolveArgs),
    /// Run a benchmark: convergence, recoverability, runtime or generalization.
    Bench(BenchArgs),
    /// Split a PGM frame sequence into background and foreground.
    Bgsub(BgsubArgs),
}

#[derive(Args, Debug, Default)]
pub struct Shape {
    /// Sets both n1 and n2.
    #[arg(long)]
    n: Option<usize>,
    #[arg(long)]
    n1: Option<usize>,
    #[arg(long)]
    n2: Option<usize>,
    #[arg(long)]
    r: Option<usize>,
    #[arg(long)]
    alpha: Option<f64>,
}

#[derive(Args, Debug, Default)]
pub struct StopArgs {
    /// `residual`, `change` or `fixed`, optionally followed by the tolerance.
    #[arg(long, num_args = 1..=2, value_names = ["MODE", "TOL"])]
    stop: Option<Vec<String>>,
    #[arg(long)]
    tol: Option<f64>,
    #[arg(long)]
    max_iters: Option<usize>,
}

#[derive(Args, Debug)]
pub struct GenArgs {
    #[command(flatten)]
    shape: Shape,
    /// `global` or `rowcol`.
    #[arg(long)]
    pattern: Option<String>,
}

#[derive(Args, Debug)]
pub struct TrainArgs {
    #[command(flatten)]
    shape: Shape,
    /// `synthetic` or `scene`.
    #[arg(long)]
    data: Option<String>,
    #[arg(long)]
    k: Option<usize>,
    #[arg(long)]
    k_bar: Option<usize>,
    #[arg(long)]
    sgd_steps: Option<usize>,
    #[arg(long)]
    learning_rate: Option<f64>,
    #[arg(long)]
    grid_instances: Option<usize>,
    /// `oracle` or `geometric`.
    #[arg(long)]
    warm_start: Option<String>,
}

#[derive(Args, Debug)]
pub struct SolveArgs {
    /// Observed matrix (`.csv` or binary).
    #[arg(long)]
    y: Option<String>,
    #[arg(long)]
    r: Option<usize>,
    #[arg(long)]
    schedule: Option<String>,
    /// Oracle thresholds from the ground truth given by --truth.
    #[arg(long)]
    oracle: bool,
    #[arg(long, num_args = 2, value_names = ["ZETA", "ETA"])]
    fixed: Option<Vec<f64>>,
    /// Ground truth; also fills the trace's rel_err column.
    #[arg(long)]
    truth: Option<String>,
    #[command(flatten)]
    stop: StopArgs,
}

#[derive(Args, Debug)]
pub struct BenchArgs {
    /// convergence | recoverability | runtime | generalization
    kind: Option<String>,
    #[command(flatten)]
    shape: Shape,
    /// Comma list of lrpca, lrpca-oracle, scaledgd.
    #[arg(long)]
    solvers: Option<String>,
    #[arg(long)]
    schedule: Option<String>,
    /// Comma list or start:stop:step.
    #[arg(long)]
    alphas: Option<String>,
    #[arg(long)]
    trials: Option<usize>,
    #[arg(long)]
    n_list: Option<String>,
    #[arg(long)]
    r_list: Option<String>,
    #[arg(long)]
    iters: Option<usize>,
    /// Comma list of n:r pairs.
    #[arg(long)]
    targets: Option<String>,
    #[command(flatten)]
    stop: StopArgs,
}

#[derive(Args, Debug)]
pub struct BgsubArgs {
    /// Directory of .pgm frames, read in name order.
    #[arg(long)]
    frames: Option<String>,
    #[arg(long)]
    r: Option<usize>,
    #[arg(long)]
    schedule: Option<String>,
    #[arg(long, num_args = 2, value_names = ["ZETA", "ETA"])]
    fixed: Option<Vec<f64>>,
    #[command(flatten)]
    stop: StopArgs,
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(e.exit_code().clamp(0, 255) as u8);
        }
    };
    match commands::run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(CliError::Usage(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(2)
        }
        Err(CliError::Run(e)) => {
            eprintln!("error: {e}");
            ExitCode::from(1)
        }
    }
}
