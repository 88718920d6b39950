//! `f0est`: command-line front end for the distinct-elements sketch.
//!
//! Exit statuses: 0 success, 1 the sketch output fail, 2 usage error,
//! 3 input/output error, 4 stream longer than `--stream-bound`, 5 snapshot
//! error, 6 a `validate` check failed.

mod args;
mod commands;

use std::process::ExitCode;

use clap::Parser;

use crate::args::{Cli, Command};
use crate::commands::Status;

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => e.exit(),
    };
    let result = match cli.command {
        Command::Estimate(a) => commands::estimate(a),
        Command::Exact(a) => commands::exact(a),
        Command::Validate(a) => commands::validate(a),
        Command::Generate(a) => commands::generate(a),
        Command::Resume(a) => commands::resume(a),
    };
    match result {
        Ok(Status::Success) => ExitCode::SUCCESS,
        Ok(Status::SketchFailed) => {
            eprintln!("f0est: the sketch output fail (⊥); rerun with another --seed");
            ExitCode::from(1)
        }
        Ok(Status::ChecksFailed) => {
            eprintln!("f0est: validation checks failed");
            ExitCode::from(6)
        }
        Err(e) => {
            eprintln!("f0est: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
