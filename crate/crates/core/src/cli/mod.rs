//! Command-line front end.

pub mod args;
pub mod commands;

use hsfusion::FusionError;

pub const EXIT_CONFIG: u8 = 2;
pub const EXIT_IO: u8 = 3;
pub const EXIT_NUMERIC: u8 = 4;

/// 2 for invalid configuration or data, 3 for I/O and unreadable input
/// files, 4 for sampler numerical failures.
pub fn exit_code(err: &anyhow::Error) -> u8 {
    for cause in err.chain() {
        if let Some(e) = cause.downcast_ref::<FusionError>() {
            return match e.root_cause() {
                FusionError::Io { .. } | FusionError::Parse { .. } => EXIT_IO,
                FusionError::Numerical { .. } => EXIT_NUMERIC,
                _ => EXIT_CONFIG,
            };
        }
        if cause.is::<std::io::Error>() {
            return EXIT_IO;
        }
    }
    EXIT_CONFIG
}
