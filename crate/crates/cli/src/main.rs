//! `affproj`: projections onto intersections of affine subspaces.
//!
//! ```text
//! affproj run --experiment 2 --alg alg2 --q 3 --output trace.csv
//! affproj run --random dim=20,k=3,seed=7 --alg alg1 --q 4 --oracle
//! affproj bench --experiment 1 --output bench.csv
//! affproj oracle --random dim=8,k=2,seed=1
//! affproj verify --experiment 1 --alg alg2 --policy all
//! ```

use std::process::ExitCode;

use clap::{Parser, Subcommand};

mod commands;
mod config;

use commands::BenchArgs;
use config::RunArgs;

#[derive(Parser, Debug)]
#[command(name = "affproj", version, about = "Accelerated alternating projections onto affine subspaces")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Solve one problem, write its trace and print a summary.
    Run(RunArgs),
    /// Sweep algorithms and window sizes; report projections needed per threshold.
    Bench(BenchArgs),
    /// Print the direct projection of the starting point.
    Oracle(RunArgs),
    /// Solve with every monitor on and check the convergence conditions.
    Verify(RunArgs),
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let outcome = match &cli.command {
        Command::Run(a) => commands::cmd_run(a).map(|()| true),
        Command::Bench(a) => commands::cmd_bench(a).map(|()| true),
        Command::Oracle(a) => commands::cmd_oracle(a).map(|()| true),
        Command::Verify(a) => commands::cmd_verify(a),
    };
    match outcome {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(2),
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}
