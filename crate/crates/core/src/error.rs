use std::path::PathBuf;

use crate::trajectory::CollisionReport;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("learning failed for dimension {dim}, basis {basis}: regressor is zero everywhere")]
    DegenerateRegressor { dim: usize, basis: usize },

    #[error("integration diverged at step {step}")]
    IntegrationDiverged { step: usize },

    #[error("path parameter {s} outside [0, {t_final}]")]
    OutOfRange { s: f64, t_final: f64 },

    #[error("execution refused: {0}")]
    Collision(CollisionReport),

    #[error("force sample {index} is not finite")]
    NonFiniteForce { index: usize },

    #[error("execution stalled at s = {s} (wall time {t_wall} s) with no further force input")]
    Stalled { s: f64, t_wall: f64 },

    #[error("no data: {0}")]
    NoData(String),

    #[error("configuration error: {0}")]
    Configuration(String),

    #[error("degenerate range: all values equal to {0}")]
    DegenerateRange(f64),

    #[error("degenerate denominator: {0}")]
    DegenerateDenominator(String),

    #[error("missing channel `{0}`")]
    MissingChannel(String),

    #[error("{path}:{line}: {msg}")]
    Parse {
        path: String,
        line: u64,
        msg: String,
    },

    #[error("{}: {source}", path.display())]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("{}: {source}", path.display())]
    Json {
        path: PathBuf,
        #[source]
        source: serde_json::Error,
    },
}

impl Error {
    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidArgument(msg.into())
    }

    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}
