use std::process::ExitCode;

use clap::Parser;
use sketchf_cli::{run_simlab, SimlabCommand};

/// Reproducible simulation experiments for the sketched F-test.
#[derive(Parser)]
#[command(name = "simlab", version)]
struct Cli {
    #[command(subcommand)]
    command: SimlabCommand,
}

fn main() -> ExitCode {
    match run_simlab(&Cli::parse().command) {
        Ok(code) => ExitCode::from(code),
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(2)
        }
    }
}
