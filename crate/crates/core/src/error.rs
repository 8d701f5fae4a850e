use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    /// An input outside the physical or mathematical domain of an operation.
    #[error("domain error: {0}")]
    Domain(String),

    #[error("no convergence: {what} (residual {residual:.3e})")]
    Convergence { what: String, residual: f64 },

    #[error("two-atom matrix of dimension {dim} needs {bytes} bytes, above the dense budget of {budget} bytes; build in sparse mode and use the Lanczos solver")]
    MemoryBudget { dim: usize, bytes: usize, budget: usize },

    /// A numerical post-processing step found nothing to work on
    /// (empty slice, missing peak, vanishing component).
    #[error("numerical failure: {0}")]
    Numerical(String),

    #[error("configuration error: {0}")]
    Config(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn domain<T>(msg: impl Into<String>) -> Result<T> {
    Err(Error::Domain(msg.into()))
}
