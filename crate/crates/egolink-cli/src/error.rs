//! Error type shared by all subcommands, mapped onto the exit-code contract:
//! 1 for validation problems, 2 for I/O problems.

use std::fmt;
use std::path::{Path, PathBuf};

use serde::Serialize;

#[derive(Debug, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum ErrorKind {
    Validation,
    Io,
}

#[derive(Debug, Serialize)]
pub struct CliError {
    pub kind: ErrorKind,
    pub message: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub path: Option<PathBuf>,
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match &self.path {
            Some(p) => write!(f, "{} ({})", self.message, p.display()),
            None => f.write_str(&self.message),
        }
    }
}

impl CliError {
    pub fn validation(message: impl Into<String>) -> Self {
        Self { kind: ErrorKind::Validation, message: message.into(), path: None }
    }

    pub fn io(message: impl Into<String>, path: &Path) -> Self {
        Self { kind: ErrorKind::Io, message: message.into(), path: Some(path.to_path_buf()) }
    }

    pub fn exit_code(&self) -> i32 {
        match self.kind {
            ErrorKind::Validation => 1,
            ErrorKind::Io => 2,
        }
    }

    /// Attaches the file a library error was triggered by, classifying
    /// underlying I/O failures as such.
    pub fn in_file(error: impl IntoCliError, path: &Path) -> Self {
        let mut e = error.into_cli_error();
        e.path = Some(path.to_path_buf());
        e
    }
}

pub trait IntoCliError {
    fn into_cli_error(self) -> CliError;
}

impl IntoCliError for std::io::Error {
    fn into_cli_error(self) -> CliError {
        CliError { kind: ErrorKind::Io, message: self.to_string(), path: None }
    }
}

impl IntoCliError for egolink::metadata::MetadataError {
    fn into_cli_error(self) -> CliError {
        match self {
            egolink::metadata::MetadataError::Io(e) => e.into_cli_error(),
            other => CliError::validation(other.to_string()),
        }
    }
}

impl IntoCliError for egolink::tracks::TrackError {
    fn into_cli_error(self) -> CliError {
        match self {
            egolink::tracks::TrackError::Io(e) => e.into_cli_error(),
            egolink::tracks::TrackError::Metadata(m) => m.into_cli_error(),
            other => CliError::validation(other.to_string()),
        }
    }
}

impl IntoCliError for egolink::simulate::SimError {
    fn into_cli_error(self) -> CliError {
        match self {
            egolink::simulate::SimError::Io(e) => e.into_cli_error(),
            egolink::simulate::SimError::Metadata(m) => m.into_cli_error(),
            egolink::simulate::SimError::Track(t) => t.into_cli_error(),
            out @ egolink::simulate::SimError::OutputExists(_) => {
                CliError { kind: ErrorKind::Io, message: out.to_string(), path: None }
            }
            other => CliError::validation(other.to_string()),
        }
    }
}

impl IntoCliError for egolink::curation::CurationError {
    fn into_cli_error(self) -> CliError {
        CliError::validation(self.to_string())
    }
}

impl IntoCliError for egolink::association::AssociationError {
    fn into_cli_error(self) -> CliError {
        CliError::validation(self.to_string())
    }
}

impl IntoCliError for egolink::eval::EvalError {
    fn into_cli_error(self) -> CliError {
        match self {
            egolink::eval::EvalError::Association(a) => a.into_cli_error(),
            other => CliError::validation(other.to_string()),
        }
    }
}
