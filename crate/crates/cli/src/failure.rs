//! Process exit codes: 0 success, 2 configuration, 3 divergence, 4 I/O.

use std::fmt;
use std::path::Path;

use driftclust::Error;

pub const CONFIG: u8 = 2;
pub const DIVERGENCE: u8 = 3;
pub const IO: u8 = 4;

#[derive(Debug)]
pub struct Failure {
    pub code: u8,
    pub message: String,
}

impl Failure {
    pub fn config(message: impl Into<String>) -> Self {
        Self {
            code: CONFIG,
            message: message.into(),
        }
    }

    pub fn io(path: &Path, err: std::io::Error) -> Self {
        Self {
            code: IO,
            message: format!("{}: {err}", path.display()),
        }
    }
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        let code = match &e {
            Error::Config { .. } | Error::InvalidArgument(_) | Error::DimensionMismatch { .. } => {
                CONFIG
            }
            Error::Divergence { .. } | Error::NonFinite(_) => DIVERGENCE,
            _ => IO,
        };
        Self {
            code,
            message: e.to_string(),
        }
    }
}

impl fmt::Display for Failure {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.message)
    }
}
