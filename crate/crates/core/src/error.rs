use thiserror::Error;

/// Errors shared across the crate.
#[derive(Debug, Error)]
pub enum Error {
    /// A caller-supplied value is outside the valid range for the operation.
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    /// A mathematical domain violation (e.g. a probability outside (0,1)).
    #[error("domain error: {0}")]
    Domain(String),

    /// A matrix that must be symmetric positive definite is not.
    #[error("not symmetric positive definite: {0}")]
    NotPositiveDefinite(String),

    /// The operation is not defined for the given model or dimension.
    #[error("unsupported operation: {0}")]
    Unsupported(String),

    /// An iterative routine exhausted its budget before reaching tolerance.
    #[error("no convergence: {0}")]
    NoConvergence(String),

    /// A requested contour level is not crossed by the evaluated surface.
    #[error("contour level {level} not crossed by the evaluated surface")]
    EmptyContour { level: f64 },

    /// A statistic is undefined for the given data (e.g. zero variance).
    #[error("degenerate input: {0}")]
    Degenerate(String),

    /// Malformed configuration or data file.
    #[error("config error: {0}")]
    Config(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error("csv error: {0}")]
    Csv(#[from] csv::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidArgument(msg.into())
    }

    pub(crate) fn domain(msg: impl Into<String>) -> Self {
        Error::Domain(msg.into())
    }

    pub(crate) fn unsupported(msg: impl Into<String>) -> Self {
        Error::Unsupported(msg.into())
    }
}
