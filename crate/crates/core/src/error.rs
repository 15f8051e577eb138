use thiserror::Error;

/// Errors raised anywhere in the localization pipeline.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("singular 2x2 matrix (|det| = {det:e} <= {threshold:e})")]
    SingularMatrix { det: f64, threshold: f64 },

    #[error("normal matrix is rank deficient")]
    RankDeficient,

    #[error("invalid geometry: {0}")]
    InvalidGeometry(String),

    #[error("LED coincides with the estimator position")]
    CoincidentPoints,

    #[error("degenerate triangulation geometry: {0}")]
    DegenerateGeometry(String),

    #[error("covariance trace is negative ({0:e})")]
    NegativeTrace(f64),

    #[error("all {0} trials were degenerate")]
    AllTrialsDegenerate(usize),

    #[error("invalid parameter `{key}`: {reason}")]
    Validation { key: String, reason: String },

    #[error("config parse error: {0}")]
    Parse(String),

    #[error("i/o error: {0}")]
    Io(String),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;

impl Error {
    pub(crate) fn validation(key: impl Into<String>, reason: impl Into<String>) -> Self {
        Error::Validation {
            key: key.into(),
            reason: reason.into(),
        }
    }
}
