use std::fmt;

use misspec_core::Error;

/// Exit status for bad input: unknown names, malformed files, bad flags.
pub const EXIT_USAGE: u8 = 2;
/// Exit status when a computation fails: fits, quadrature, singular blocks.
pub const EXIT_NUMERIC: u8 = 3;

#[derive(Debug)]
pub struct Failure {
    pub code: u8,
    pub message: String,
}

impl Failure {
    pub fn usage(message: impl Into<String>) -> Self {
        Self {
            code: EXIT_USAGE,
            message: message.into(),
        }
    }

    pub fn numeric(message: impl Into<String>) -> Self {
        Self {
            code: EXIT_NUMERIC,
            message: message.into(),
        }
    }

    /// Prefix the message, keeping the exit code.
    pub fn context(self, what: impl fmt::Display) -> Self {
        Self {
            code: self.code,
            message: format!("{what}: {}", self.message),
        }
    }
}

impl fmt::Display for Failure {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.message)
    }
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        match e {
            Error::Unknown { .. } | Error::Parameter(_) | Error::Dimension(_) | Error::Output(_) => {
                Failure::usage(e.to_string())
            }
            Error::Domain { .. }
            | Error::NotPositiveDefinite { .. }
            | Error::NonFinite { .. }
            | Error::Quadrature { .. }
            | Error::ZeroEvidence { .. }
            | Error::NoConvergence { .. }
            | Error::TooManyFailures { .. } => Failure::numeric(e.to_string()),
        }
    }
}

impl From<std::io::Error> for Failure {
    fn from(e: std::io::Error) -> Self {
        Failure::usage(e.to_string())
    }
}

pub type CliResult<T> = std::result::Result<T, Failure>;
