use std::path::PathBuf;

/// Errors raised by the simulator.
#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("invalid configuration field `{field}`: {reason}")]
    Config { field: String, reason: String },

    #[error("dimension mismatch: {0}")]
    Dimension(String),

    #[error("singular matrix: {0}")]
    Singular(String),

    #[error("empty user set")]
    EmptySet,

    #[error("user {0} is not in the scheduled set")]
    NotScheduled(usize),

    #[error("domain error: {0}")]
    Domain(String),

    #[error("position ({x_km:.3} km, {y_km:.3} km) lies outside the pattern grid of beam {beam}")]
    OutOfGrid { beam: usize, x_km: f64, y_km: f64 },

    #[error("QoS targets unreachable for users {users:?}")]
    Infeasible { users: Vec<usize> },

    #[error("user has zero demand and is excluded from the ratio")]
    ZeroDemand,

    #[error("{}: {source}", path.display())]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("csv: {0}")]
    Csv(#[from] csv::Error),

    #[error("json: {0}")]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub(crate) fn config(field: impl Into<String>, reason: impl Into<String>) -> Self {
        Error::Config {
            field: field.into(),
            reason: reason.into(),
        }
    }

    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
