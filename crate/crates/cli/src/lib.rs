//! Command-line driver: neuron sweeps, optimal paths, the model comparison,
//! the prior study and the oracle cross-checks.

pub mod commands;
pub mod config;
pub mod output;
pub mod plot;

use std::path::PathBuf;

use clap::{Parser, Subcommand};

pub use config::{Profile, RunConfig};

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("{0}")]
    Validation(String),
    #[error("{0}")]
    Verification(String),
}

impl CliError {
    pub fn validation(msg: impl Into<String>) -> Self {
        Self::Validation(msg.into())
    }

    pub fn exit_code(&self) -> i32 {
        match self {
            Self::Validation(_) => 1,
            Self::Verification(_) => 2,
        }
    }
}

impl From<popcode::Error> for CliError {
    fn from(e: popcode::Error) -> Self {
        Self::Validation(e.to_string())
    }
}

#[derive(Debug, Parser)]
#[command(name = "popcode", version, about = "Energy-constrained population codes")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
    /// TOML config with [run], [sweep], [neuron], [paths], [compare] and [verify] sections.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// Output directory (default `results`).
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,
    #[arg(long, global = true, value_enum)]
    pub profile: Option<Profile>,
}

#[derive(Debug, Clone, PartialEq, Eq, Subcommand)]
pub enum Command {
    /// Simulate the (v_rest, g_leak, g_syn) grid.
    Sweep,
    /// Fit dispersion and energy surfaces to a sweep and trace optimal paths.
    Paths {
        /// Directory holding sweep.csv, cells.csv and response.csv (default: --out).
        #[arg(long)]
        input: Option<PathBuf>,
    },
    /// Compare the energy-homeostatic model with the mean-rate and capacity models.
    Compare,
    /// Firing-rate deviations across objectives and priors.
    PriorStudy,
    /// Cross-check closed forms and optimizers against the oracles.
    Verify,
}

pub fn run(cli: Cli) -> Result<(), CliError> {
    let mut cfg = RunConfig::load(cli.config.as_deref())?.resolve(cli.seed, cli.out, cli.profile);
    match cli.command {
        Command::Sweep => commands::sweep(&cfg),
        Command::Paths { input } => {
            if input.is_some() {
                cfg.run.input = input;
            }
            commands::paths(&cfg)
        }
        Command::Compare => commands::compare(&cfg),
        Command::PriorStudy => commands::prior_study(&cfg),
        Command::Verify => commands::verify(&cfg),
    }
}
