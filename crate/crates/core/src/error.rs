use std::path::PathBuf;

/// Errors raised across the crate.
///
/// Solver and fit failures are not errors: they are reported as outcomes
/// (`SolveStatus`, `FitOutcome::Failed`). These variants cover contract
/// violations, malformed input and I/O.
#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("contract violation: {0}")]
    Contract(String),

    /// An internal guarantee did not hold. Never expected.
    #[error("internal invariant violated: {0}")]
    Invariant(String),

    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },

    #[error(
        "singular matrix: pivot {magnitude:e} in column {column} is below tolerance {threshold:e}"
    )]
    SingularMatrix {
        column: usize,
        magnitude: f64,
        threshold: f64,
    },

    #[error("target lies outside the range of the matrix (residual {residual:e} > {tolerance:e})")]
    RangeViolation { residual: f64, tolerance: f64 },

    #[error("{path}:{line}: {reason}")]
    Parse {
        path: PathBuf,
        line: u64,
        reason: String,
    },

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub(crate) fn contract(msg: impl Into<String>) -> Self {
        Error::Contract(msg.into())
    }

    pub(crate) fn check_dim(expected: usize, found: usize) -> Result<()> {
        if expected == found {
            Ok(())
        } else {
            Err(Error::DimensionMismatch { expected, found })
        }
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
