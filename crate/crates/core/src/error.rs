use thiserror::Error;

use crate::geometry::NodeId;

#[derive(Debug, Error)]
pub enum Error {
    /// A configuration value is out of its admissible range.
    #[error("invalid configuration: `{field}` {reason}")]
    Config { field: &'static str, reason: String },

    /// The two endpoints of an arc are antipodal, so the great circle is not unique.
    #[error("degenerate great circle: {entry} and {exit} are antipodal")]
    DegenerateGreatCircle { entry: NodeId, exit: NodeId },

    /// Malformed operation input (empty polyline, infeasible demand, ...).
    #[error("invalid input: {0}")]
    Input(String),

    #[error("failed to parse config: {0}")]
    ConfigParse(String),

    #[error("failed to parse config file {path}: {message}")]
    ConfigFile { path: String, message: String },

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl Error {
    /// Whether the error stems from the run configuration rather than the computation.
    pub fn is_config(&self) -> bool {
        matches!(
            self,
            Error::Config { .. } | Error::ConfigParse(_) | Error::ConfigFile { .. }
        )
    }

    pub(crate) fn config(field: &'static str, reason: impl Into<String>) -> Self {
        Error::Config {
            field,
            reason: reason.into(),
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
