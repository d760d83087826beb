//! Command-line front end: load problem files, dispatch certifications,
//! and emit human-readable or machine-readable reports.
//!
//! Exit codes: 0 = completed, 1 = certificate refuted, 2 = usage or parse
//! error.

mod args;
mod commands;
mod output;

use std::process::ExitCode;

use clap::Parser;

use args::Cli;

fn main() -> ExitCode {
    let cli = Cli::parse();
    match commands::dispatch(&cli) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(2)
        }
    }
}
