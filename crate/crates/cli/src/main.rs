mod commands;
mod config;
mod output;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use dryfric_core::Error;

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("configuration error: {0}")]
    Config(String),
    #[error(transparent)]
    Core(#[from] Error),
    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
}

impl CliError {
    fn exit_code(&self) -> u8 {
        match self {
            CliError::Config(_) => 2,
            CliError::Core(Error::InvalidParams(_) | Error::OffLattice { .. }) => 2,
            CliError::Core(Error::MemoryBudget { .. } | Error::EventCapExceeded { .. }) => 3,
            CliError::Core(_) => 4,
            CliError::Io(_) => 1,
        }
    }
}

#[derive(Debug, Parser)]
#[command(name = "dryfric", version, about = "Noisy stick-slip friction: exact simulation and Kolmogorov solvers")]
struct Cli {
    /// JSON run configuration.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Output directory (created if missing).
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    #[arg(long, global = true)]
    seed: Option<u64>,
    #[arg(long, global = true)]
    threads: Option<usize>,
    /// `key=value` applied to the configuration; dotted keys reach nested
    /// fields, e.g. `params.delta=0.25`.
    #[arg(long = "override", global = true, value_name = "KEY=VALUE")]
    overrides: Vec<String>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Clone, Copy, Subcommand)]
enum Command {
    /// Excursion Monte Carlo: statistics with confidence intervals and duration histograms.
    Simulate,
    /// Stationary statistics from the discretized resolvent, one row per (statistic, p).
    Solve,
    /// Laplace transforms of the phase durations and their densities at 0+.
    Durations,
    /// Velocity power spectral density.
    Psd,
    /// Fill missing cells of a (k, l) statistic table.
    Extrapolate,
    /// Empirical convergence order in p.
    Kappa,
}

fn run(cli: &Cli) -> Result<(), CliError> {
    let resolved = config::load(
        cli.config.as_deref(),
        &cli.overrides,
        cli.seed,
        cli.out.as_deref(),
        cli.threads,
    )?;
    if let Some(t) = resolved.config.threads {
        // fails only if a pool already exists, which keeps the first setting
        let _ = rayon::ThreadPoolBuilder::new().num_threads(t).build_global();
    }
    std::fs::create_dir_all(resolved.output_dir())?;
    match cli.command {
        Command::Simulate => commands::simulate(&resolved),
        Command::Solve => commands::solve(&resolved),
        Command::Durations => commands::durations(&resolved),
        Command::Psd => commands::psd(&resolved),
        Command::Extrapolate => commands::extrapolate(&resolved),
        Command::Kappa => commands::kappa(&resolved),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("dryfric: {e}");
            if let CliError::Core(Error::MemoryBudget { nodes, bytes, budget }) = &e {
                eprintln!("refused: N_p = {nodes} nodes, estimated {bytes} bytes, budget {budget} bytes");
            }
            ExitCode::from(e.exit_code())
        }
    }
}
