use std::path::PathBuf;

use serde_json::{json, Value};
use smms_lab::LabError;
use thiserror::Error;

use crate::config::Violation;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("configuration has {} violation(s)", .0.len())]
    Config(Vec<Violation>),
    #[error("{0}")]
    Usage(String),
    /// A field reference that parsed but cannot be evaluated on the domain.
    #[error("{0}")]
    Input(String),
    #[error("{context}: {source}")]
    Lab {
        context: String,
        #[source]
        source: LabError,
    },
    #[error("{}: {source}", .path.display())]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

impl CliError {
    pub fn kind(&self) -> &'static str {
        match self {
            CliError::Config(_) => "config",
            CliError::Usage(_) => "usage",
            CliError::Input(_) => "input",
            CliError::Lab { source, .. } => source.kind(),
            CliError::Io { .. } => "io",
        }
    }

    /// 2 for anything the caller can fix in the invocation, 1 otherwise.
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Config(_) | CliError::Usage(_) | CliError::Input(_) => 2,
            CliError::Lab { .. } | CliError::Io { .. } => 1,
        }
    }

    pub fn to_json(&self) -> Value {
        let violations = match self {
            CliError::Config(v) => v.clone(),
            _ => Vec::new(),
        };
        json!({
            "status": "error",
            "kind": self.kind(),
            "message": self.to_string(),
            "violations": violations,
        })
    }

    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        CliError::Io { path: path.into(), source }
    }
}

pub trait Context<T> {
    fn context(self, what: &str) -> Result<T, CliError>;
}

impl<T> Context<T> for Result<T, LabError> {
    fn context(self, what: &str) -> Result<T, CliError> {
        self.map_err(|source| CliError::Lab { context: what.to_string(), source })
    }
}
