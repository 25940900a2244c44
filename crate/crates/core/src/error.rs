use thiserror::Error;

/// Errors raised by the distance toolkit.
#[derive(Debug, Error)]
pub enum Error {
    /// An argument lies outside the mathematical domain of a function.
    #[error("domain error: {0}")]
    Domain(String),

    /// Two objects that must share a dimension do not.
    #[error("dimension mismatch: {left} vs {right}")]
    DimensionMismatch { left: usize, right: usize },

    /// A matrix or buffer does not have the expected shape.
    #[error("shape mismatch: {0}")]
    Shape(String),

    /// A coordinate or intermediate value is NaN or infinite.
    #[error("non-finite value: {0}")]
    NonFinite(String),

    /// The result is too large to represent; use the scaled variant.
    #[error("overflow: {0}")]
    Overflow(String),

    /// A series or quadrature did not reach the requested accuracy.
    #[error("no convergence in {what} after {iterations} steps (last change {residual:e})")]
    NonConvergence {
        what: &'static str,
        iterations: usize,
        residual: f64,
    },

    /// A quadrature rule of this order cannot be built in double precision.
    #[error("unsupported quadrature order {order}: {reason}")]
    UnsupportedOrder { order: usize, reason: String },

    /// A tabulated kernel was asked for a radius outside its grid.
    #[error("kernel evaluated at radius {radius} beyond table range {max}")]
    KernelDomain { radius: f64, max: f64 },

    /// An exact (enumerative) oracle was called on an instance that is too large.
    #[error("instance too large: {0}")]
    SizeLimit(String),

    /// An optimization run kept increasing its loss.
    #[error("divergence after {steps} steps (loss {loss})")]
    Divergence { steps: usize, loss: f64 },

    #[error("parse error at line {line}: {msg}")]
    Parse { line: usize, msg: String },

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    pub(crate) fn domain(msg: impl Into<String>) -> Self {
        Error::Domain(msg.into())
    }
}
