use thiserror::Error;

/// Errors raised by the model, the primitive and the simulator.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("state family undefined at a = {a}: need a > 0 and 9a^2 >= 8")]
    Domain { a: f64 },
    #[error("covariance matrix is singular (det = {det:e})")]
    Singular { det: f64 },
    #[error("covariance matrix violates the uncertainty relation (min eigenvalue {min_eig:e})")]
    NotPhysical { min_eig: f64 },
    #[error("dimension mismatch: {0}")]
    Dimension(String),
    #[error("invalid mode selection: {0}")]
    InvalidModes(String),
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
    #[error("configuration error: {0}")]
    Config(String),
    #[error("simulator invariant violated: {0}")]
    Invariant(String),
}

pub type Result<T> = std::result::Result<T, Error>;
