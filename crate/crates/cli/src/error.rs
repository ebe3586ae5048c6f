use std::fmt;
use std::path::{Path, PathBuf};

use serde::Serialize;

/// Exit code for malformed command lines and missing required inputs.
pub const EXIT_USAGE: i32 = 2;
/// Exit code for runtime failures and failed checks.
pub const EXIT_FAILURE: i32 = 1;

#[derive(Debug)]
pub enum CliError {
    Usage(String),
    Core(fasctl_core::Error),
    Io { path: PathBuf, source: std::io::Error },
    Parse { path: PathBuf, message: String },
    Check(String),
}

impl CliError {
    pub fn kind(&self) -> &'static str {
        match self {
            CliError::Usage(_) => "usage",
            CliError::Core(e) => e.kind(),
            CliError::Io { .. } => "io",
            CliError::Parse { .. } => "parse",
            CliError::Check(_) => "check_failed",
        }
    }

    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Usage(_) => EXIT_USAGE,
            _ => EXIT_FAILURE,
        }
    }

    pub fn io(path: &Path, source: std::io::Error) -> Self {
        CliError::Io { path: path.to_path_buf(), source }
    }

    pub fn parse(path: &Path, message: impl fmt::Display) -> Self {
        CliError::Parse { path: path.to_path_buf(), message: message.to_string() }
    }

    pub fn to_json(&self) -> String {
        #[derive(Serialize)]
        struct Body<'a> {
            kind: &'a str,
            message: String,
            exit_code: i32,
        }
        #[derive(Serialize)]
        struct Report<'a> {
            schema_version: u32,
            error: Body<'a>,
        }
        let report = Report {
            schema_version: 1,
            error: Body { kind: self.kind(), message: self.to_string(), exit_code: self.exit_code() },
        };
        serde_json::to_string(&report).unwrap_or_else(|_| format!("{{\"error\":{{\"kind\":\"{}\"}}}}", self.kind()))
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CliError::Usage(m) => write!(f, "{m}"),
            CliError::Core(e) => write!(f, "{e}"),
            CliError::Io { path, source } => write!(f, "{}: {source}", path.display()),
            CliError::Parse { path, message } => write!(f, "{}: {message}", path.display()),
            CliError::Check(m) => write!(f, "{m}"),
        }
    }
}

impl std::error::Error for CliError {}

impl From<fasctl_core::Error> for CliError {
    fn from(e: fasctl_core::Error) -> Self {
        CliError::Core(e)
    }
}

pub type CliResult<T> = Result<T, CliError>;
