use std::path::PathBuf;

/// Everything that can go wrong while building, solving or reporting.
#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("invalid schema: {0}")]
    Schema(String),

    #[error("invalid cohort: {0}")]
    Cohort(String),

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("assignment has {actual} entries but the cohort has {expected} patients")]
    LengthMismatch { expected: usize, actual: usize },

    #[error("arm {arm} is empty")]
    EmptyArm { arm: usize },

    #[error("numerical covariate `{0}` has zero variance and was dropped")]
    DroppedCovariate(String),

    #[error("no covariate named `{0}` of the requested kind")]
    UnknownCovariate(String),

    #[error("no feasible assignment: {0}")]
    Infeasible(String),

    #[error("instance too large: {what} is {actual}, limit is {limit}")]
    SizeCap {
        what: &'static str,
        actual: usize,
        limit: usize,
    },

    #[error("unsupported: {0}")]
    Unsupported(String),

    #[error("{0}")]
    Data(String),

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

impl Error {
    /// Process exit code for the command-line tool.
    ///
    /// 2 is reserved for usage errors (reported by the argument parser).
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Config(_) | Error::Unsupported(_) => 2,
            Error::Schema(_)
            | Error::Cohort(_)
            | Error::Data(_)
            | Error::Io { .. }
            | Error::LengthMismatch { .. }
            | Error::UnknownCovariate(_)
            | Error::DroppedCovariate(_)
            | Error::EmptyArm { .. } => 3,
            Error::Infeasible(_) => 4,
            Error::SizeCap { .. } => 5,
        }
    }

    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
