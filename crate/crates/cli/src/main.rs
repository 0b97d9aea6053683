//! `gcf`: static allocation, horizon solves and closed-loop simulation.
//!
//! Exit codes: 0 success, 2 malformed input or I/O failure, 3 infeasible
//! force set, 4 integration failure, 5 horizon solver not converged.

mod allocate;
mod error;
mod mpc;
mod output;
mod parse;
mod simulate;

use std::process::ExitCode;

use clap::{Parser, Subcommand};

#[derive(Debug, Parser)]
#[command(
    name = "gcf",
    version,
    about = "Gravity-compensation-first allocation and simulation"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Split one desired force into gravity and tracking parts.
    Allocate(allocate::AllocateArgs),
    /// Run closed-loop scenarios and write plot-ready logs.
    Simulate(simulate::SimulateArgs),
    /// Solve one horizon problem and write the solver trace.
    Mpc(mpc::MpcArgs),
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match &cli.command {
        Command::Allocate(a) => allocate::run(a).map(|s| println!("{s}")),
        Command::Simulate(a) => simulate::run(a),
        Command::Mpc(a) => mpc::run(a).map(|s| println!("{s}")),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}
