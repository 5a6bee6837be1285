use thiserror::Error;

/// Errors produced by the solvers, the estimator and the CLI layer.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("non-finite intermediate value in {0}")]
    NonFinite(&'static str),

    #[error("normalization mismatch: closed-form ln Z = {closed}, direct ln Z = {direct}")]
    NormalizationMismatch { closed: f64, direct: f64 },

    #[error("steady state not converged: tail population {tail:e} at Fock dimension {dim} exceeds {tol:e}")]
    NoConvergence { dim: usize, tail: f64, tol: f64 },

    #[error("singular Liouvillian system at Fock dimension {dim}")]
    Singular { dim: usize },

    #[error("time integration unstable after {step} steps: {reason}")]
    Unstable { step: usize, reason: String },

    #[error("at least 2 peaks are required to estimate the nonlinearity, found {found}")]
    InsufficientPeaks { found: usize },

    #[error("grid point {axis} = {value}: {source}")]
    AtGridPoint {
        axis: &'static str,
        value: f64,
        #[source]
        source: Box<Error>,
    },
}

impl Error {
    /// Strips any grid-point annotation.
    pub fn root(&self) -> &Error {
        match self {
            Error::AtGridPoint { source, .. } => source.root(),
            other => other,
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
