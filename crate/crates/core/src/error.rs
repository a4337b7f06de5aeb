use thiserror::Error;

/// Errors raised by the solver pipeline.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("parameter `{field}` must be strictly positive, got {value}")]
    NonPositiveParameter { field: &'static str, value: f64 },

    #[error("parameter `{field}` must be finite, got {value}")]
    NonFinite { field: &'static str, value: f64 },

    #[error("argument {value} is outside the domain {domain}")]
    OutOfDomain { value: f64, domain: String },

    #[error("point {value} is outside the support of the {orientation} law")]
    OutOfSupport { value: f64, orientation: &'static str },

    #[error("solver failed for {what}: best residual {residual:e}")]
    SolverFailure { what: &'static str, residual: f64 },

    #[error("consistency check failed for {what}: discrepancy {residual:e}")]
    ConsistencyFailure { what: &'static str, residual: f64 },

    #[error("quadrature did not converge: last two estimates {previous} and {current}")]
    QuadratureNonConvergence { previous: f64, current: f64 },

    #[error("invalid input: {0}")]
    InvalidInput(String),
}

pub type Result<T> = std::result::Result<T, Error>;
