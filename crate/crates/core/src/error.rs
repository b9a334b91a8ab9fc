use thiserror::Error;

pub type Result<T, E = CmfError> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum CmfError {
    #[error("the all-zero coefficient vector is not a valid equation")]
    ZeroEcv,

    #[error("source powers must be positive and finite, got ({0}, {1})")]
    InvalidPower(f64, f64),

    #[error(
        "g_min table covers sum SNR up to {cap}, but the channel has ||g||^2 = {norm_sq}; \
         g_min pruning would be unsound"
    )]
    TableTooShort { norm_sq: f64, cap: f64 },

    #[error("invalid candidate set: {0}")]
    InvalidCandidateSet(String),

    #[error("quadrature did not converge: error estimate {estimate:.3e} exceeds tolerance {tolerance:.3e}")]
    QuadratureNotConverged { estimate: f64, tolerance: f64 },

    #[error("{count} compositions exceed the cap of {cap}")]
    CompositionOverflow { count: u128, cap: u128 },

    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}
