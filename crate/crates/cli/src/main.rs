//! Configuration-driven experiment runner for the polytopal mirror-descent
//! topology optimizer. See `README.md` at the workspace root for the config
//! format and examples.

mod commands;
mod config;

use clap::{Parser, Subcommand};
use std::path::PathBuf;
use std::process::ExitCode;

#[derive(Parser)]
#[command(
    name = "simpl",
    about = "Multi-material topology optimization by projected mirror descent",
    version
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run an experiment: writes history.csv, VTK/PGM fields, and a summary.
    ///
    /// Exit status: 0 when the stopping tolerance was met, 2 when the
    /// iteration cap was hit first, 1 on any error.
    Run { config: PathBuf },
    /// Parse and validate a config without running anything.
    Validate { config: PathBuf },
    /// Evaluate one of the independent reference computations used by the
    /// verification suite and print its values.
    Oracle { name: String },
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let code = match cli.command {
        Command::Run { config } => commands::run(&config),
        Command::Validate { config } => commands::validate(&config),
        Command::Oracle { name } => commands::oracle(&name),
    };
    ExitCode::from(code)
}
