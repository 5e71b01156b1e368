//! `fgdlab`: command-line front end for `fgd-core`.
//!
//! Exit codes: 0 success, 1 runtime or estimation failure, 2 usage or
//! validation error.

mod commands;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};

use commands::CliError;

/// Relative `--out` paths are resolved against this directory when set.
pub const OUT_DIR_ENV: &str = "FGDLAB_OUT_DIR";

#[derive(Debug, Parser)]
#[command(name = "fgdlab", version, about = "Fractional Gompertz diffusion lab")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum Method {
    Circulant,
    Cholesky,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum EstimatorArg {
    H1,
    H2,
    H3,
    H4,
    S1,
    S2,
    S3,
    S4,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Sample a fractional Brownian motion path.
    SimulateFbm {
        #[arg(long)]
        hurst: f64,
        #[arg(long, default_value_t = 1024)]
        points: usize,
        #[arg(long, default_value_t = 1.0)]
        horizon: f64,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, value_enum, default_value_t = Method::Circulant)]
        method: Method,
        /// Output CSV; stdout when omitted.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Sample a fractional Gompertz diffusion path from its explicit solution.
    SimulateGompertz {
        #[arg(long, default_value_t = 3.0)]
        x0: f64,
        #[arg(long, default_value_t = 0.5)]
        alpha: f64,
        #[arg(long, default_value_t = 2.0)]
        beta: f64,
        #[arg(long, default_value_t = 1.5)]
        sigma: f64,
        #[arg(long, default_value_t = 0.75)]
        hurst: f64,
        #[arg(long, default_value_t = 1024)]
        points: usize,
        #[arg(long, default_value_t = 1.0)]
        horizon: f64,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Run one estimator on a path CSV and print a JSON record.
    Estimate {
        #[arg(long = "in")]
        input: PathBuf,
        #[arg(long, value_enum)]
        estimator: EstimatorArg,
        /// Hurst index for s1..s3: a number, `h1` or `h3`.
        #[arg(long, default_value = "h3")]
        hurst_est: String,
        #[arg(long, default_value = "1,2,4,8")]
        schedule: String,
        #[arg(long, default_value = "div")]
        convention: String,
    },
    /// Run a Monte Carlo experiment and write summary.csv and summary.json.
    Experiment {
        #[arg(long, conflicts_with = "preset", required_unless_present = "preset")]
        spec: Option<PathBuf>,
        #[arg(long)]
        preset: Option<String>,
        #[arg(long, default_value = ".")]
        out: PathBuf,
        /// Overrides the replicate count of the spec or preset.
        #[arg(long)]
        replicates: Option<usize>,
        /// Overrides the base seed of the spec or preset.
        #[arg(long)]
        seed: Option<u64>,
        /// Worker threads; defaults to the machine's parallelism.
        #[arg(long)]
        threads: Option<usize>,
    },
    /// Tabulate the limit-variance series over a grid of Hurst indices.
    VarianceTable {
        /// `start:stop:step` or a comma-separated list.
        #[arg(long, default_value = "0.55:0.95:0.05")]
        h_grid: String,
        #[arg(long, default_value_t = 1e-12)]
        tol: f64,
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

fn run(cli: Cli) -> Result<(), CliError> {
    match cli.command {
        Command::SimulateFbm { hurst, points, horizon, seed, method, out } => {
            commands::simulate_fbm(hurst, points, horizon, seed, method, out.as_deref())
        }
        Command::SimulateGompertz { x0, alpha, beta, sigma, hurst, points, horizon, seed, out } => {
            commands::simulate_gompertz([x0, alpha, beta, sigma, hurst, horizon], points, seed, out.as_deref())
        }
        Command::Estimate { input, estimator, hurst_est, schedule, convention } => {
            commands::estimate(&input, estimator, &hurst_est, &schedule, &convention)
        }
        Command::Experiment { spec, preset, out, replicates, seed, threads } => {
            commands::experiment(spec.as_deref(), preset.as_deref(), &out, replicates, seed, threads)
        }
        Command::VarianceTable { h_grid, tol, out } => commands::variance_table(&h_grid, tol, out.as_deref()),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
