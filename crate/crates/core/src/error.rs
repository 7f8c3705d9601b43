use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    /// Evaluation requested outside the recorded coverage.
    #[error("time {t} outside history coverage [{t_min}, {t_max}]")]
    Range { t: f64, t_min: f64, t_max: f64 },

    /// The history or solver state cannot support the request.
    #[error("state error: {0}")]
    State(String),

    #[error("precondition violated: {0}")]
    Precondition(String),

    #[error("no root: {0}")]
    NoRoot(String),

    #[error("empty interval ({lo}, {hi})")]
    EmptyInterval { lo: f64, hi: f64 },

    #[error("dwell {requested} is infeasible; largest admissible dwell is {h_max}")]
    InfeasibleDwell { requested: f64, h_max: f64 },

    #[error("line {line}: {message}")]
    Parse { line: usize, message: String },

    #[error("invalid value for `{key}`: {message}")]
    Validation { key: String, message: String },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub(crate) fn validation(key: &str, message: impl Into<String>) -> Self {
        Error::Validation {
            key: key.to_string(),
            message: message.into(),
        }
    }

    /// True for errors caused by user configuration rather than the run itself.
    pub fn is_config_error(&self) -> bool {
        matches!(self, Error::Parse { .. } | Error::Validation { .. })
    }

    /// Short machine-readable category used in CLI error records.
    pub fn category(&self) -> &'static str {
        match self {
            Error::Range { .. } => "range",
            Error::State(_) => "state",
            Error::Precondition(_) => "precondition",
            Error::NoRoot(_) => "no_root",
            Error::EmptyInterval { .. } => "empty_interval",
            Error::InfeasibleDwell { .. } => "infeasible_dwell",
            Error::Parse { .. } => "parse",
            Error::Validation { .. } => "validation",
            Error::Io(_) => "io",
            Error::Json(_) => "json",
        }
    }
}
