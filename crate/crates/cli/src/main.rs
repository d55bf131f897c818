//! `nonmarkov`: batch driver for the response-function quantifiers.
//!
//! Exit codes: 0 success, 2 configuration error, 3 numerical failure,
//! 4 oracle mismatch, 1 output I/O failure.

use std::process::ExitCode;

use clap::Parser;

mod config;
mod output;
mod run;

use config::{Cli, RunConfig};

fn main() -> ExitCode {
    let cli = Cli::parse();
    let cfg = match RunConfig::from_cli(&cli) {
        Ok(c) => c,
        Err(e) => {
            eprintln!("error: {e}");
            return ExitCode::from(2);
        }
    };
    match run::run(&cfg) {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            eprintln!("error: {f}");
            ExitCode::from(f.exit_code())
        }
    }
}
