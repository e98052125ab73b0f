use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("domain error: {0}")]
    Domain(String),

    #[error("failed to converge: {0}")]
    Convergence(String),

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("degenerate input: {0}")]
    DegenerateInput(String),

    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),

    /// Test not applicable for the given shape (e.g. `n <= p` for the classical test).
    #[error("dimension error: {0}")]
    Dimension(String),

    #[error("design is numerically rank deficient (condition estimate {0:.3e})")]
    SingularDesign(f64),

    #[error("sketch is numerically singular (condition estimate {0:.3e})")]
    SingularSketch(f64),

    #[error("constraint infeasible: {0}")]
    InfeasibleConstraint(String),
}

pub(crate) fn domain<T>(msg: impl Into<String>) -> Result<T> {
    Err(Error::Domain(msg.into()))
}

pub(crate) fn config<T>(msg: impl Into<String>) -> Result<T> {
    Err(Error::Config(msg.into()))
}
