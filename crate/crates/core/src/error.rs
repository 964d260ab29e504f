//! Error taxonomy shared across the crate.

use thiserror::Error;

/// Crate-wide result alias.
pub type Result<T> = std::result::Result<T, ZoError>;

#[derive(Debug, Error)]
pub enum ZoError {
    /// Input vector length does not match the declared dimension.
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    /// Input violates a mathematical precondition (non-finite point, empty
    /// batch, non-positive radius, ...).
    #[error("contract violation: {0}")]
    Contract(String),

    /// Point outside the domain the operation is defined on.
    #[error("domain error: {0}")]
    Domain(String),

    /// A computed quantity came out NaN or infinite.
    #[error("non-finite value in {context}")]
    NonFinite { context: String },

    /// Requested feature is not defined for this problem family or set.
    #[error("not available: {0}")]
    NotAvailable(String),

    /// An iterative routine ran out of its iteration budget. Carries the
    /// best iterate found and the residual-like quantity it was driving down.
    #[error("iteration budget exhausted in {context}: residual {residual:.3e} after {iterations} iterations")]
    IterationBudget {
        context: &'static str,
        iterations: usize,
        residual: f64,
        best: Vec<f64>,
    },

    /// Iterates blew past the divergence guard. Carries the trace rows
    /// recorded up to the failure.
    #[error("divergence at iteration {iteration}: |x|_inf = {norm:.3e}")]
    Divergence {
        iteration: usize,
        norm: f64,
        trace: Vec<crate::trace::TraceRow>,
    },

    /// Experiment or problem configuration rejected, naming the offending key.
    #[error("config error: {0}")]
    Config(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl ZoError {
    /// Shorthand used by input validators.
    pub fn contract(msg: impl Into<String>) -> Self {
        ZoError::Contract(msg.into())
    }

    pub fn config(msg: impl Into<String>) -> Self {
        ZoError::Config(msg.into())
    }
}

/// Checks that every coordinate of `x` is finite.
pub fn ensure_finite(x: &ndarray::ArrayView1<'_, f64>, context: &str) -> Result<()> {
    if x.iter().all(|v| v.is_finite()) {
        Ok(())
    } else {
        Err(ZoError::Domain(format!(
            "{context}: point has a non-finite coordinate"
        )))
    }
}

/// Checks that `x` has length `expected`.
pub fn ensure_dim(x: &ndarray::ArrayView1<'_, f64>, expected: usize) -> Result<()> {
    if x.len() == expected {
        Ok(())
    } else {
        Err(ZoError::DimensionMismatch {
            expected,
            got: x.len(),
        })
    }
}
