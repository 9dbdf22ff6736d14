use thiserror::Error;

/// Errors raised by the solver library.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    /// An argument lies outside the domain of the operation.
    #[error("domain error: {0}")]
    Domain(String),

    /// Adaptive integration could not reach the requested accuracy.
    #[error("integration did not converge on [{a}, {b}]: estimated error {estimate:e}")]
    Tolerance { a: f64, b: f64, estimate: f64 },

    /// The time step does not resolve the memory length or horizon.
    #[error("grid error: {0}")]
    Grid(String),

    /// Vectors or histories of incompatible sizes.
    #[error("shape mismatch: expected {expected}, got {actual}")]
    Shape { expected: usize, actual: usize },

    /// A user-supplied function returned an inadmissible value.
    #[error("evaluation error: {0}")]
    Eval(String),

    /// The linear system could not be factorized.
    #[error("linear solve failed: {0}")]
    Solve(String),

    /// Inconsistent scheme or problem parameters.
    #[error("invalid configuration: {0}")]
    Config(String),
}

pub type Result<T> = std::result::Result<T, Error>;
