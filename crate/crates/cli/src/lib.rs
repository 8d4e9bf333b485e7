//! Command-line surface for the dense-reward toolkit.
//!
//! Five subcommands tie the library's engines together: `g4rl-run`
//! (hierarchical shaping variants on grid mazes), `scar-credit` (per-unit
//! credit for token sequences), `scar-invariance` (policy-invariance
//! trials on random tree MDPs), `transfer-run` (value-label transfer
//! between spectrally matched mazes), and `calibrate` (matching-tolerance
//! proposals from measured spectral distances).
//!
//! Every run is reproducible bit for bit from its config and seed; only
//! wall-clock columns vary, and the aggregate artifacts leave those out.

pub mod args;
pub mod commands;
pub mod config;
pub mod gamefile;
pub mod invariance;
pub mod oracle;
pub mod out;
pub mod plot;
pub mod walks;

use clap::error::ErrorKind;
use clap::Parser;

/// Errors carried up to the process boundary.
#[derive(Debug, thiserror::Error)]
pub enum CliError {
    /// Bad flags, config values, or input files; exit code 2.
    #[error("{0}")]
    Validation(String),
    /// Failures while running: IO, numeric breakdowns; exit code 1.
    #[error("{0}")]
    Runtime(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Validation(_) => 2,
            CliError::Runtime(_) => 1,
        }
    }
}

impl From<std::io::Error> for CliError {
    fn from(err: std::io::Error) -> Self {
        CliError::Runtime(err.to_string())
    }
}

/// Wraps any displayable error as a validation failure.
pub fn validation(err: impl std::fmt::Display) -> CliError {
    CliError::Validation(err.to_string())
}

/// Wraps any displayable error as a runtime failure.
pub fn runtime(err: impl std::fmt::Display) -> CliError {
    CliError::Runtime(err.to_string())
}

/// Parses the arguments, dispatches, and reports the exit code.
///
/// Help and version requests print to stdout and exit 0; any other parse
/// problem (unknown subcommand included) prints the usage text to stderr
/// and exits 2; command failures print one `error:` line and exit with
/// the error's code.
pub fn main_with<I, T>(argv: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match args::Cli::try_parse_from(argv) {
        Ok(cli) => cli,
        Err(err)
            if matches!(err.kind(), ErrorKind::DisplayHelp | ErrorKind::DisplayVersion) =>
        {
            print!("{err}");
            return 0;
        }
        Err(err) => {
            eprint!("{err}");
            return 2;
        }
    };
    match commands::dispatch(cli) {
        Ok(()) => 0,
        Err(err) => {
            eprintln!("error: {err}");
            err.exit_code()
        }
    }
}
