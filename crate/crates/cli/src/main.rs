//! `fasctl`: synthesize observer/controller designs, simulate, verify, score.

mod commands;
mod error;
mod manifest;

use std::process::ExitCode;

use clap::{Parser, Subcommand};

use crate::error::{CliError, CliResult, EXIT_USAGE};

#[derive(Debug, Parser)]
#[command(name = "fasctl", version, about = "Fault-estimating observer and FAS controller toolkit")]
struct Cli {
    /// Report errors on stderr as a JSON object.
    #[arg(long, global = true)]
    error_json: bool,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Solve the observer LMI, place the controller poles and write design.json.
    Synth(commands::synth::SynthArgs),
    /// Simulate the closed loop and write trajectory CSV plus metric JSON.
    Sim(commands::sim::SimArgs),
    /// Check designs, bundled published gains or an LMI certificate.
    Verify(commands::verify::VerifyArgs),
    /// Recompute error and state metrics from a trajectory CSV.
    Metrics(commands::metrics::MetricsArgs),
}

fn dispatch(cli: &Cli) -> CliResult<()> {
    match &cli.command {
        Command::Synth(a) => commands::synth::run(a),
        Command::Sim(a) => commands::sim::run(a),
        Command::Verify(a) => commands::verify::run(a),
        Command::Metrics(a) => commands::metrics::run(a),
    }
}

fn report(err: &CliError, json: bool) -> ExitCode {
    if json {
        eprintln!("{}", err.to_json());
    } else {
        eprintln!("error: {err}");
    }
    ExitCode::from(err.exit_code() as u8)
}

fn main() -> ExitCode {
    let json_requested = std::env::args().any(|a| a == "--error-json");
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) if e.use_stderr() => {
            if json_requested {
                return report(&CliError::Usage(e.render().to_string().trim_end().to_string()), true);
            }
            let _ = e.print();
            return ExitCode::from(EXIT_USAGE as u8);
        }
        Err(e) => {
            // help and version requests
            let _ = e.print();
            return ExitCode::SUCCESS;
        }
    };
    match dispatch(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => report(&e, cli.error_json),
    }
}
