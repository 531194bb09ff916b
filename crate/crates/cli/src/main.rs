//! `prodlab`: batch front end for the product-matrix laboratory.

mod commands;
mod config;
mod manifest;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use config::Overrides;

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("configuration error: {0}")]
    Config(String),
    #[error("run aborted: {0}")]
    Abort(String),
}

impl CliError {
    fn exit_code(&self) -> u8 {
        match self {
            CliError::Config(_) => 2,
            CliError::Abort(_) => 3,
        }
    }
}

impl From<prodlab::Error> for CliError {
    fn from(e: prodlab::Error) -> Self {
        CliError::Abort(e.to_string())
    }
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        CliError::Abort(e.to_string())
    }
}

#[derive(Debug, Parser)]
#[command(
    name = "prodlab",
    version,
    about = "Linear eigenvalue statistics of products of iid random matrices"
)]
struct Cli {
    #[command(flatten)]
    global: GlobalArgs,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Args)]
struct GlobalArgs {
    /// Master seed, overriding the config file.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Worker threads (0 = all cores).
    #[arg(long, global = true, env = "PRODLAB_THREADS")]
    threads: Option<usize>,
    /// Multiplies every configured tolerance.
    #[arg(long, global = true)]
    tolerance_scale: Option<f64>,
}

#[derive(Debug, Args)]
struct RunArgs {
    #[arg(long)]
    config: PathBuf,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Matrix identities, linearization and covariance quadrature checks.
    Selftest,
    /// Monte Carlo fluctuations of linear statistics against the limiting covariance.
    Clt(RunArgs),
    /// Empirical radial law of one product against the limiting density.
    Density(RunArgs),
    /// Covariance of the resolvent process against its kernel.
    Xi(RunArgs),
    /// Eigenvalues of the linearization against those of the product.
    LinearizeCheck {
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let overrides = Overrides {
        seed: cli.global.seed,
        threads: cli.global.threads,
        tolerance_scale: cli.global.tolerance_scale,
    };
    let result = match cli.command {
        Command::Selftest => commands::selftest(overrides),
        Command::Clt(a) => commands::clt(&a.config, &a.out, overrides),
        Command::Density(a) => commands::density(&a.config, &a.out, overrides),
        Command::Xi(a) => commands::xi(&a.config, &a.out, overrides),
        Command::LinearizeCheck { config, out } => {
            commands::linearize_check(config.as_deref(), out.as_deref(), overrides)
        }
    };
    match result {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(1),
        Err(e) => {
            eprintln!("prodlab: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
