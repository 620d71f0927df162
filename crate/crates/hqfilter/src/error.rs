use thiserror::Error;

/// Errors raised by model construction, simulation and filtering.
#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch in {context}: {left} vs {right}")]
    DimensionMismatch {
        context: &'static str,
        left: usize,
        right: usize,
    },

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error(
        "coherent state leakage {leakage:.3e} exceeds limit {limit:.3e}; \
         at least {required} Fock levels are needed"
    )]
    CoherentLeakage {
        leakage: f64,
        limit: f64,
        required: usize,
    },

    #[error("cavity analog is degenerate: {0}")]
    DegenerateAnalog(String),

    #[error("state invariant violated at step {step}: {detail}")]
    StateInvariant { step: usize, detail: String },

    #[error("covariance invariant violated at step {step}: {detail}")]
    CovarianceInvariant { step: usize, detail: String },

    #[error("operator is not Hermitian: max |A - A^dag| = {deviation:.3e}")]
    NotHermitian { deviation: f64 },
}

pub type Result<T> = std::result::Result<T, Error>;
