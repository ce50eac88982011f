//! Command-line front end: process specs, kernel registry, run
//! configuration, a rayon executor, and JSON/CSV output.

pub mod commands;
pub mod config;
pub mod error;
pub mod exec;
pub mod process_spec;
pub mod registry;
pub mod selftest;

use std::ffi::OsString;
use std::io::Write;

pub use commands::{emit, run, Outcome, RunReport};
pub use config::{parse_args, RunConfig};
pub use error::{CliError, CliResult};
pub use exec::RayonExecutor;

/// Parses, runs and writes; returns the exit status. Errors go to
/// `stderr` as JSON.
pub fn run_cli<I, T>(argv: I, stdout: &mut dyn Write, stderr: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let result = parse_args(argv).and_then(|config| {
        let outcome = run(&config)?;
        emit(&outcome, &config, stdout)?;
        match outcome.failure {
            Some(f) => Err(CliError::SelfTest(f)),
            None => Ok(()),
        }
    });
    match result {
        Ok(()) => 0,
        Err(CliError::Info(text)) => {
            let _ = write!(stdout, "{text}");
            0
        }
        Err(e) => {
            let _ = writeln!(stderr, "{}", e.to_json());
            e.exit_code()
        }
    }
}
