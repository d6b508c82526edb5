//! Command-line front end for the `sgplan` planners: JSON game and policy
//! files, CSV traces, and a sequential experiment runner.
//!
//! Exit codes: 0 on success, 1 on bad input or usage, 2 when
//! `solve-discounted` stops without converging.

use std::ffi::OsString;
use std::io::Write;
use std::path::PathBuf;

use thiserror::Error;

pub mod cli;
pub mod format;
pub mod suite;
pub mod trace;

pub const EXIT_OK: i32 = 0;
pub const EXIT_INPUT: i32 = 1;
pub const EXIT_NOT_CONVERGED: i32 = 2;

/// Environment variable capping the worker-thread count.
pub const THREADS_VAR: &str = "SG_THREADS";

#[derive(Debug, Error)]
pub enum CliError {
    #[error("{}: {source}", path.display())]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("{}: {message}", path.display())]
    Parse { path: PathBuf, message: String },
    #[error("{}: refusing to write non-finite value {value}", path.display())]
    NonFinite { path: PathBuf, value: f64 },
    #[error("{0}")]
    Usage(String),
    #[error(transparent)]
    Core(#[from] sgplan::Error),
    #[error("experiment `{name}` failed with exit code {code}: {message}")]
    Experiment { name: String, code: i32, message: String },
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Experiment { code, .. } => *code,
            _ => EXIT_INPUT,
        }
    }
}

/// Sizes the global rayon pool from `SG_THREADS`, if set.
pub fn configure_threads() -> Result<(), CliError> {
    let Ok(raw) = std::env::var(THREADS_VAR) else {
        return Ok(());
    };
    let threads: usize = raw
        .trim()
        .parse()
        .ok()
        .filter(|&n| n > 0)
        .ok_or_else(|| CliError::Usage(format!("{THREADS_VAR} must be a positive integer, got `{raw}`")))?;
    rayon::ThreadPoolBuilder::new()
        .num_threads(threads)
        .build_global()
        .map_err(|e| CliError::Usage(format!("cannot size the thread pool: {e}")))
}

/// Parses `args` (including the program name) and runs the command,
/// returning the process exit code.
pub fn run<I, T>(args: I, out: &mut dyn Write, err: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let parsed = match <cli::Cli as clap::Parser>::try_parse_from(args) {
        Ok(parsed) => parsed,
        Err(e) => {
            use clap::error::ErrorKind;
            let rendered = e.render().to_string();
            return match e.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => {
                    let _ = out.write_all(rendered.as_bytes());
                    EXIT_OK
                }
                _ => {
                    let _ = err.write_all(rendered.as_bytes());
                    EXIT_INPUT
                }
            };
        }
    };
    match cli::execute(parsed.command, out) {
        Ok(code) => code,
        Err(e) => {
            let _ = writeln!(err, "error: {e}");
            e.exit_code()
        }
    }
}
