use std::io;

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid noise schedule: {0}")]
    Schedule(String),

    #[error("contract violation: {0}")]
    Contract(String),

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("training diverged at step {step}: loss = {loss}")]
    Divergence { step: usize, loss: f64 },

    #[error("fit failed: {0}")]
    Fit(String),

    #[error("evaluation error: {0}")]
    Eval(String),

    #[error("malformed input{}: {msg}", line.map(|l| format!(" at line {l}")).unwrap_or_default())]
    Format { line: Option<usize>, msg: String },

    #[error("query counter mismatch for {method}: expected {expected:?}, observed {observed:?}")]
    QueryMismatch {
        method: String,
        expected: (u64, u64),
        observed: (u64, u64),
    },

    #[error(transparent)]
    Io(#[from] io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

impl Error {
    pub(crate) fn contract(msg: impl Into<String>) -> Self {
        Error::Contract(msg.into())
    }

    pub(crate) fn config(msg: impl Into<String>) -> Self {
        Error::Config(msg.into())
    }

    pub(crate) fn format(line: Option<usize>, msg: impl Into<String>) -> Self {
        Error::Format {
            line,
            msg: msg.into(),
        }
    }

    /// Process exit code for the CLI: 1 usage, 2 data error, 3 numeric failure.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Config(_) | Error::Contract(_) => 1,
            Error::Format { .. } | Error::Io(_) | Error::Json(_) | Error::Csv(_) => 2,
            Error::Schedule(_)
            | Error::Divergence { .. }
            | Error::Fit(_)
            | Error::Eval(_)
            | Error::QueryMismatch { .. } => 3,
        }
    }
}
