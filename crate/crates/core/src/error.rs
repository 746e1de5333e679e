use std::fmt;
use std::path::PathBuf;

use crate::domain::{JobId, JobState, TrajectoryKind};

pub type Result<T, E = Error> = std::result::Result<T, E>;

/// One finding from scenario validation. `record` names the offending entity
/// (a job id, a queue id, a file line), `field` the attribute that failed.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Diagnostic {
    pub source: String,
    pub record: String,
    pub field: String,
    pub message: String,
}

impl Diagnostic {
    pub fn new(
        source: impl Into<String>,
        record: impl Into<String>,
        field: impl Into<String>,
        message: impl Into<String>,
    ) -> Self {
        Self {
            source: source.into(),
            record: record.into(),
            field: field.into(),
            message: message.into(),
        }
    }
}

impl fmt::Display for Diagnostic {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "{}: {} [{}]: {}",
            self.source, self.record, self.field, self.message
        )
    }
}

#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("job {job}: illegal transition from {from:?} on {event:?}")]
    IllegalTransition {
        job: JobId,
        from: JobState,
        event: TrajectoryKind,
    },

    #[error("job {job}: trajectory event at {at} ms precedes last logged event at {last} ms")]
    TrajectoryTime { job: JobId, at: u64, last: u64 },

    #[error("job {0} has not been decisioned")]
    NotDecisioned(JobId),

    #[error("cannot schedule event at {at} ms, clock is already at {clock} ms")]
    ClockViolation { at: u64, clock: u64 },

    #[error("job {0}: handle time must be positive")]
    ZeroHandleTime(JobId),

    #[error("config: {0}")]
    Config(String),

    #[error("scenario has {} validation finding(s); first: {}", .0.len(), .0[0])]
    Invalid(Vec<Diagnostic>),

    #[error("{}: {source}", path.display())]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("runtime: {0}")]
    Runtime(String),
}

impl Error {
    pub fn config(msg: impl Into<String>) -> Self {
        Error::Config(msg.into())
    }

    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    /// True for errors caused by bad inputs rather than by the simulation itself.
    pub fn is_config_error(&self) -> bool {
        matches!(
            self,
            Error::Config(_) | Error::Invalid(_) | Error::Io { .. }
        )
    }
}
