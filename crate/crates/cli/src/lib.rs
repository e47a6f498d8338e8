//! Library side of the `frachs` command line tool. `main.rs` only parses
//! arguments and maps [`CliError`] to an exit code.

pub mod cache;
pub mod commands;
pub mod config;
pub mod output;

use std::path::PathBuf;

use clap::{Parser, Subcommand};

pub use config::RunConfig;

#[derive(Debug, Parser)]
#[command(name = "frachs", version, about = "Fractional Hardy-Schroedinger numerics on radial domains")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
    /// JSON run configuration.
    #[arg(long, global = true, value_name = "PATH")]
    pub config: Option<PathBuf>,
    /// Output directory; overrides `output.dir` in the config.
    #[arg(long, global = true, value_name = "DIR")]
    pub out: Option<PathBuf>,
    /// Worker threads (default: all cores).
    #[arg(long, global = true, value_name = "K")]
    pub threads: Option<usize>,
    /// With `mass`: also run the planted-coefficient recovery check.
    #[arg(long, global = true)]
    pub manufactured: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Subcommand)]
pub enum Command {
    /// Closed-form constants table.
    Constants,
    /// Minimize the Hardy-Sobolev quotient.
    Solve,
    /// Extract the mass of the ball.
    Mass,
    /// Regime scan over a (gamma, lambda) grid.
    Scan,
    /// Check the discrete operator against closed forms.
    KernelSelftest,
}

impl Command {
    pub fn name(&self) -> &'static str {
        match self {
            Command::Constants => "constants",
            Command::Solve => "solve",
            Command::Mass => "mass",
            Command::Scan => "scan",
            Command::KernelSelftest => "kernel-selftest",
        }
    }
}

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("{0}")]
    Config(String),
    #[error(transparent)]
    Core(#[from] frachs::Error),
    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
    /// A check or every scan row failed.
    #[error("{0}")]
    Failed(String),
}

impl CliError {
    /// 2 for bad input or unmet preconditions, 3 for numerical failures.
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Config(_) | CliError::Io(_) => 2,
            CliError::Core(e) => match e {
                frachs::Error::Numerical(_) => 3,
                _ => 2,
            },
            CliError::Failed(_) => 3,
        }
    }
}

/// Run a parsed command line; returns the lines meant for standard output.
pub fn run(cli: &Cli) -> Result<Vec<String>, CliError> {
    let path = cli.config.as_ref().ok_or_else(|| CliError::Config("--config PATH is required".into()))?;
    let mut cfg = RunConfig::load(path)?;
    if let Some(dir) = &cli.out {
        cfg.output.dir = dir.to_string_lossy().into_owned();
    }
    if let Some(k) = cli.threads {
        if k == 0 {
            return Err(CliError::Config("--threads must be positive".into()));
        }
        // a second call in the same process keeps the first pool
        let _ = rayon::ThreadPoolBuilder::new().num_threads(k).build_global();
    }
    let opts = commands::RunOptions { manufactured: cli.manufactured, cache_dir: Some(cache::cache_dir()) };
    commands::dispatch(cli.command, &cfg, &opts)
}
