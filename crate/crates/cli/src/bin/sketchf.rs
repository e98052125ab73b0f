use std::process::ExitCode;

use clap::{Parser, Subcommand};
use sketchf_cli::*;

/// Sketched F-test for the global null in high-dimensional regression.
#[derive(Parser)]
#[command(name = "sketchf", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run the classical or sketched F-test on CSV data.
    Test(TestArgs),
    /// Asymptotic power of a test.
    #[command(subcommand)]
    Power(PowerArgs),
    /// Intrinsic dimension and recommended sketch size for a synthetic problem.
    Dim(DimArgs),
    /// Monte Carlo check of a concentration inequality.
    Oracle(OracleArgs),
    /// Simulation experiments.
    #[command(subcommand)]
    Simlab(SimlabCommand),
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let status = match &cli.command {
        Command::Test(a) => run_test(a),
        Command::Power(a) => run_power(a),
        Command::Dim(a) => run_dim(a),
        Command::Oracle(a) => run_oracle(a),
        Command::Simlab(c) => run_simlab(c),
    };
    match status {
        Ok(code) => ExitCode::from(code),
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(2)
        }
    }
}
