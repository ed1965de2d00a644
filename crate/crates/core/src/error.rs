use thiserror::Error;

/// Errors raised across the crate.
#[derive(Debug, Error)]
pub enum Error {
    #[error("matrix is not unitary (residual {residual:.3e})")]
    NotUnitary { residual: f64 },

    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("matrix logarithm is ambiguous: eigenvalue {re:.3e}{im:+.3e}i lies on the negative real axis")]
    BranchAmbiguity { re: f64, im: f64 },

    #[error("invalid qubit index {0}")]
    InvalidQubit(usize),

    #[error("singular matrix: {0}")]
    Singular(String),

    #[error("eigenstate labelling failed: {0}")]
    Labelling(String),

    #[error("dephasing time is infinite: all noise amplitudes are zero")]
    InfiniteDephasing,

    #[error("{what} did not converge after {iterations} iterations (residual {residual:.3e})")]
    NonConvergence {
        what: &'static str,
        iterations: usize,
        residual: f64,
    },

    #[error("root bracket [{lo}, {hi}] does not contain a sign change")]
    Bracket { lo: f64, hi: f64 },

    #[error("argument out of domain: {0}")]
    Domain(String),

    #[error("parse error: {0}")]
    Parse(String),

    #[error("model error: {0}")]
    Model(String),

    #[error("divergence detected: {0}")]
    Divergence(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    /// True for numerical failures (as opposed to invalid input).
    pub fn is_numerical(&self) -> bool {
        matches!(
            self,
            Error::NonConvergence { .. } | Error::Bracket { .. } | Error::Divergence(_)
        )
    }
}

pub type Result<T> = std::result::Result<T, Error>;
