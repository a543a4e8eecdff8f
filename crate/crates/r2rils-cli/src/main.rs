//! Experiment front end: generate datasets, complete single problems, run
//! seeded sweeps, and verify the solver against its analytic oracles.
//!
//! Exit codes: 0 success, 1 input error, 2 non-convergence, 3 internal
//! failure.

mod commands;
mod config;
mod fmt;
mod plot;
mod sweep;
mod verify;

use clap::{Parser, Subcommand};

pub const EXIT_INPUT: i32 = 1;
pub const EXIT_NONCONVERGENCE: i32 = 2;
pub const EXIT_INTERNAL: i32 = 3;

pub struct CliError {
    pub code: i32,
    pub message: String,
}

impl CliError {
    pub fn internal(err: impl std::fmt::Display) -> Self {
        Self {
            code: EXIT_INTERNAL,
            message: err.to_string(),
        }
    }

    pub fn internal_any(err: impl std::fmt::Display) -> Self {
        Self::internal(err)
    }

    /// Maps core errors: anything attributable to the input data or
    /// configuration is an input error, the rest are internal failures.
    pub fn from_core(err: r2rils::Error) -> Self {
        use r2rils::Error::*;
        let code = match &err {
            InvalidDimensions(_) | IndexOutOfRange { .. } | DuplicateEntry { .. }
            | EmptyObservations | InvalidConfig(_) | InvalidArgument(_) | Parse { .. }
            | Io(_) => EXIT_INPUT,
            _ => EXIT_INTERNAL,
        };
        Self {
            code,
            message: err.to_string(),
        }
    }
}

#[derive(Parser)]
#[command(
    name = "r2rils",
    version,
    about = "Low rank matrix completion by rank-2r iterative least squares"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate a ground-truth matrix and an observed-entry sample.
    Generate(commands::GenerateArgs),
    /// Complete a matrix from an observed-triplets file.
    Complete(commands::CompleteArgs),
    /// Run a seeded experiment sweep and emit CSV plus an SVG chart.
    Sweep(sweep::SweepArgs),
    /// Run the built-in oracle and property checks.
    Verify,
}

fn main() {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let help = matches!(
                e.kind(),
                clap::error::ErrorKind::DisplayHelp | clap::error::ErrorKind::DisplayVersion
            );
            let _ = e.print();
            std::process::exit(if help { 0 } else { EXIT_INPUT });
        }
    };
    let outcome = match &cli.command {
        Command::Generate(args) => commands::run_generate(args),
        Command::Complete(args) => commands::run_complete(args),
        Command::Sweep(args) => sweep::run(args),
        Command::Verify => verify::run(),
    };
    if let Err(e) = outcome {
        eprintln!("error: {}", e.message);
        std::process::exit(e.code);
    }
}
