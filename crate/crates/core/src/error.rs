use thiserror::Error;

/// Errors raised across the crate.
///
/// Variants are grouped so the CLI can map them to distinct exit codes:
/// validation problems, data/IO problems and numerical failures.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("invalid cohort spec: {0}")]
    InvalidSpec(String),

    #[error("invalid fold plan: {0}")]
    InvalidPlan(String),

    #[error("no events observed{}", context.as_deref().map(|c| format!(" ({c})")).unwrap_or_default())]
    NoEvents { context: Option<String> },

    #[error("variance matrix is singular")]
    SingularVariance,

    #[error("c-index undefined: no comparable pairs")]
    UndefinedCIndex,

    #[error("AUC undefined for class {class}: only one outcome present")]
    UndefinedAuc { class: usize },

    #[error("confusion row undefined: truth class {class} is empty")]
    UndefinedRow { class: usize },

    #[error("unsupported number of clusters for exhaustive matching: {0} (max 8)")]
    UnsupportedK(usize),

    #[error("io error: {0}")]
    Io(#[from] std::io::Error),

    #[error("csv error: {0}")]
    Csv(#[from] csv::Error),

    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),

    #[error("malformed data: {0}")]
    Data(String),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;

impl Error {
    pub(crate) fn no_events() -> Self {
        Error::NoEvents { context: None }
    }

    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidInput(msg.into())
    }

    /// Process exit code: 2 validation, 3 data or IO, 4 numerical.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::InvalidInput(_)
            | Error::InvalidSpec(_)
            | Error::InvalidPlan(_)
            | Error::UnsupportedK(_) => 2,
            Error::Io(_) | Error::Csv(_) | Error::Json(_) | Error::Data(_) | Error::NoEvents { .. } => 3,
            Error::SingularVariance
            | Error::UndefinedCIndex
            | Error::UndefinedAuc { .. }
            | Error::UndefinedRow { .. } => 4,
        }
    }
}
