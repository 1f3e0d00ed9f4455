use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    /// Cholesky factorisation failed even after adding every jitter level.
    #[error("covariance matrix is not positive definite (jitter tried: {jitters:?})")]
    NotPositiveDefinite { jitters: Vec<f64> },

    #[error("all {restarts} optimizer restarts failed")]
    OptimizationFailed { restarts: usize },

    #[error("predictive standard deviation is zero at index {0}")]
    ZeroScale(usize),

    #[error("trimming iteration {iteration} failed: {source}")]
    Iteration {
        iteration: usize,
        #[source]
        source: Box<Error>,
    },

    #[error("line {line}: {message}")]
    Parse { line: u64, message: String },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidArgument(msg.into())
    }

    /// True for failures of the numerical machinery, as opposed to bad input.
    pub fn is_numerical(&self) -> bool {
        match self {
            Error::NotPositiveDefinite { .. }
            | Error::OptimizationFailed { .. }
            | Error::ZeroScale(_) => true,
            Error::Iteration { source, .. } => source.is_numerical(),
            _ => false,
        }
    }
}
