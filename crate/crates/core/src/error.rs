use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
    #[error("invalid generator spec: {0}")]
    InvalidSpec(String),
    #[error("{what} is not positive definite")]
    NotPositiveDefinite { what: String },
    #[error("no closed-form oracle for the {0} variant")]
    UnsupportedOracle(&'static str),
    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },
    #[error("{what} is singular (estimated condition number {condition_number:.3e})")]
    SingularCovariance { what: String, condition_number: f64 },
    #[error("estimation failed: {0}")]
    Estimation(String),
    #[error("gradient descent diverged: loss increased for {streak} consecutive iterations (iteration {iteration}, loss {loss})")]
    Convergence {
        iteration: usize,
        streak: usize,
        loss: f64,
    },
    #[error("no counterfactual exists for a model with zero weights")]
    NoCounterfactual,
    #[error("pattern undefined: model output has zero variance")]
    UndefinedPattern,
    #[error("suppressor mass undefined for an all-zero attribution")]
    UndefinedMass,
    #[error("AUROC undefined: ground-truth mask contains a single class")]
    UndefinedAuroc,
    #[error("exact Shapley enumeration supports at most {max} features, got {d}")]
    TooManyFeatures { d: usize, max: usize },
    #[error("config error at `{path}`: {message}")]
    Config { path: String, message: String },
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidArgument(msg.into())
    }

    pub(crate) fn config(path: impl Into<String>, message: impl Into<String>) -> Self {
        Error::Config {
            path: path.into(),
            message: message.into(),
        }
    }

    /// True for errors caused by bad user input rather than numerical failure.
    pub fn is_config_error(&self) -> bool {
        matches!(
            self,
            Error::Config { .. } | Error::InvalidSpec(_) | Error::InvalidArgument(_) | Error::Json(_)
        )
    }
}
