#![allow(clippy::neg_cmp_op_on_partial_ord)]

mod config;
mod error;
mod output;
mod report;
mod run;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use crate::config::Config;
use crate::error::CliResult;

/// Decoherence of a mechanical oscillator under fluctuating minimal-length
/// and metric models: simulations, closed-form curves, fits and bounds.
///
/// Every subcommand reads flat `key = value` settings from `--config` and
/// from trailing KEY=VALUE arguments (which win). Unknown keys are errors.
/// Exit codes: 0 ok, 2 config error, 3 numeric failure, 4 model inconsistency.
#[derive(Parser)]
#[command(name = "fluctlab", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Integrate a master equation and overlay the closed-form curves
    Simulate(Settings),
    /// Average stochastic trajectories (gamma = 0 only)
    Ensemble(Settings),
    /// Fit exponential (T1) or Ramsey (T2) decays from CSV files
    Fit(Settings),
    /// Turn T1, T2 and the ground-state ellipticity into parameter bounds
    Bounds(Settings),
    /// Wigner function on a grid with a Gaussian ellipticity fit
    Wigner(Settings),
    /// Tabulate closed-form curves without integrating
    Analytic(Settings),
}

#[derive(Args)]
struct Settings {
    /// Settings file with one `key = value` per line
    #[arg(short, long)]
    config: Option<PathBuf>,
    /// Settings applied after the file
    #[arg(value_name = "KEY=VALUE")]
    set: Vec<String>,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let (handler, settings): (fn(Config) -> CliResult<()>, Settings) = match cli.command {
        Command::Simulate(s) => (run::simulate, s),
        Command::Ensemble(s) => (run::ensemble, s),
        Command::Fit(s) => (report::fit, s),
        Command::Bounds(s) => (report::bounds, s),
        Command::Wigner(s) => (report::wigner, s),
        Command::Analytic(s) => (run::analytic, s),
    };
    match Config::load(settings.config.as_deref(), &settings.set).and_then(handler) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("fluctlab: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
