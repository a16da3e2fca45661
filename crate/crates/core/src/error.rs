use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid parameter `{name}`: {reason}")]
    InvalidParameter { name: &'static str, reason: String },

    #[error("dimension mismatch: {0}")]
    Dimension(String),

    #[error("invalid trajectory: {0}")]
    Trajectory(String),

    #[error("horizon of {horizon} slots is too short: {reason}")]
    HorizonTooShort { horizon: usize, reason: String },

    #[error("solver failure: {0}")]
    Solver(String),

    #[error("no feasible horizon found up to {t_max} slots")]
    Unbounded { t_max: usize },

    #[error("scenario file: {0}")]
    Schema(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

impl Error {
    pub(crate) fn param(name: &'static str, reason: impl Into<String>) -> Self {
        Error::InvalidParameter {
            name,
            reason: reason.into(),
        }
    }
}
