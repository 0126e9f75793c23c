use thiserror::Error;

/// Errors raised by the simulator.
///
/// The CLI maps [`Error::InvalidArgument`] to a configuration failure and
/// everything else to a numerical failure.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("contract violation: {0}")]
    ContractViolation(String),

    #[error("Hermite recurrence overflow at Fock index {index}")]
    HermiteOverflow { index: usize },

    #[error("squeezing undefined: stabilizer expectation vanishes")]
    UndefinedSqueezing,

    #[error("numerical consistency: {0}")]
    Numerical(String),

    #[error("decoder consistency: {0}")]
    Decoder(String),

    #[error("Fock truncation: population {population:.3e} in the top levels exceeds {limit:.1e}")]
    Truncation { population: f64, limit: f64 },

    #[error("integrator failed to converge: {0}")]
    Integrator(String),

    #[error("jump-time bisection failed: {0}")]
    JumpBisection(String),

    #[error("linear algebra: {0}")]
    Linalg(#[from] ndarray_linalg::error::LinalgError),
}

impl Error {
    /// True for errors caused by bad input rather than by the numerics.
    pub fn is_config_error(&self) -> bool {
        matches!(self, Error::InvalidArgument(_))
    }
}

pub type Result<T> = std::result::Result<T, Error>;
