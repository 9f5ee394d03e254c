use thiserror::Error;

pub type Result<T> = std::result::Result<T, DqError>;

#[derive(Debug, Error)]
pub enum DqError {
    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("probability level {0} is outside (0, 1)")]
    InvalidLevel(f64),

    #[error("{measure} is unsupported for {model}: infinite mean")]
    UnsupportedMeasure { measure: &'static str, model: String },

    #[error("dispersion matrix is not positive semidefinite (smallest eigenvalue {0:e})")]
    NotPositiveSemidefinite(f64),

    #[error("dispersion matrix is singular")]
    SingularMatrix,

    #[error("calibration failed: {0}")]
    Calibration(String),

    #[error("diversification ratio is undefined: sum of marginal risks is zero")]
    UndefinedRatio,

    #[error("limit does not exist: {0}")]
    LimitDoesNotExist(String),

    #[error("no convergence: {0}")]
    NonConvergence(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl DqError {
    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        DqError::InvalidInput(msg.into())
    }

    /// True for failures of the numerics (as opposed to bad input).
    pub fn is_numerical(&self) -> bool {
        matches!(
            self,
            DqError::UnsupportedMeasure { .. }
                | DqError::Calibration(_)
                | DqError::UndefinedRatio
                | DqError::LimitDoesNotExist(_)
                | DqError::NonConvergence(_)
        )
    }
}
