//! Error type shared by the whole crate.

use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("point ({x}, {y}) lies outside the unit square")]
    OutOfDomain { x: f64, y: f64 },

    /// A non-finite value showed up where a finite one was required
    /// (integrand evaluation, nodal interpolation, ...).
    #[error("non-finite value: {0}")]
    NonFinite(String),

    /// Direct solver failure; carries whatever pivot/structure information
    /// the backend reported. For Oseen systems this is the runtime signal
    /// that the coarse mesh is too coarse for the given viscosity.
    #[error("linear solver failed: {0}")]
    Solver(String),

    #[error(
        "Newton did not converge at step {step} (t = {time}): residual {residual:.3e} after {iters} iterations"
    )]
    NewtonDiverged {
        step: usize,
        time: f64,
        residual: f64,
        iters: usize,
    },

    #[error("io error: {0}")]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    pub fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidArgument(msg.into())
    }

    /// True for failures of the numerical machinery (as opposed to bad input).
    pub fn is_numerical(&self) -> bool {
        matches!(
            self,
            Error::Solver(_) | Error::NewtonDiverged { .. } | Error::NonFinite(_)
        )
    }
}
