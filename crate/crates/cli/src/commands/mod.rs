//! Subcommand implementations.

pub mod calibrate;
pub mod g4rl;
pub mod invariance;
pub mod scar;
pub mod transfer;

use crate::args::{Cli, Command};
use crate::CliError;

pub fn dispatch(cli: Cli) -> Result<(), CliError> {
    match cli.command {
        Command::G4rlRun(args) => g4rl::run(&args),
        Command::ScarCredit(args) => scar::run(&args),
        Command::ScarInvariance(args) => invariance::run(&args),
        Command::TransferRun(args) => transfer::run(&args),
        Command::Calibrate(args) => calibrate::run(&args),
    }
}

/// Maps shaping-module errors onto exit codes: config and environment
/// preconditions are validation failures, anything else is a runtime
/// breakdown.
pub(crate) fn shaping_error(err: denserew::shaping::ShapingError) -> CliError {
    use denserew::shaping::ShapingError;
    match err {
        ShapingError::InvalidConfig(_) | ShapingError::InvalidEnv(_)
        | ShapingError::DimensionError { .. } => CliError::Validation(err.to_string()),
        _ => CliError::Runtime(err.to_string()),
    }
}
