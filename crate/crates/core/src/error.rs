use thiserror::Error;

/// Which block of a partitioned information matrix failed a check.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum InfoBlock {
    /// The narrow-model block `J11`.
    Narrow,
    /// The departure block `J22`.
    Departure,
    /// `J22 - J21 J11^{-1} J12`.
    Schur,
    /// The assembled wide matrix.
    Assembled,
}

impl std::fmt::Display for InfoBlock {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        let s = match self {
            InfoBlock::Narrow => "J11",
            InfoBlock::Departure => "J22",
            InfoBlock::Schur => "J22 - J21 J11^-1 J12",
            InfoBlock::Assembled => "J_wide",
        };
        f.write_str(s)
    }
}

#[derive(Debug, Error)]
pub enum Error {
    #[error("domain error in {what}: {detail}")]
    Domain { what: &'static str, detail: String },

    #[error("information block {block} is not positive definite ({detail})")]
    NotPositiveDefinite { block: InfoBlock, detail: String },

    #[error("dimension mismatch: {0}")]
    Dimension(String),

    #[error("non-finite integrand value {value} at z = {at}")]
    NonFinite { at: f64, value: f64 },

    #[error("quadrature did not reach tolerance: estimated error {error:e} after {intervals} intervals")]
    Quadrature { error: f64, intervals: usize },

    #[error("posterior evidence is zero at z = {z}")]
    ZeroEvidence { z: f64 },

    #[error("fit did not converge after {iterations} iterations (gradient norm {grad_norm:e}); trace: {trace}")]
    NoConvergence {
        iterations: usize,
        grad_norm: f64,
        trace: String,
    },

    #[error("unknown {kind} '{name}'")]
    Unknown { kind: &'static str, name: String },

    #[error("invalid parameter: {0}")]
    Parameter(String),

    #[error("output error: {0}")]
    Output(String),

    #[error("study aborted: {failures} of {total} replications failed (first failure: {first})")]
    TooManyFailures {
        failures: usize,
        total: usize,
        first: String,
    },
}

impl Error {
    pub(crate) fn domain(what: &'static str, detail: impl Into<String>) -> Self {
        Error::Domain {
            what,
            detail: detail.into(),
        }
    }
}

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Output(e.to_string())
    }
}

impl From<csv::Error> for Error {
    fn from(e: csv::Error) -> Self {
        Error::Output(e.to_string())
    }
}

pub type Result<T> = std::result::Result<T, Error>;
