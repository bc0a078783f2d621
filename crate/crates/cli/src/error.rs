use std::fmt;

use lqar_core::Error;
use serde::Serialize;

/// Process exit codes.
pub mod exit {
    pub const OK: i32 = 0;
    pub const NOT_CONVERGED: i32 = 2;
    pub const INPUT: i32 = 3;
    pub const NUMERICAL: i32 = 4;
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CliError {
    pub kind: &'static str,
    pub message: String,
    #[serde(skip)]
    pub code: i32,
}

impl CliError {
    pub fn input(message: impl Into<String>) -> Self {
        CliError {
            kind: "input",
            message: message.into(),
            code: exit::INPUT,
        }
    }

    pub fn io(path: &std::path::Path, err: impl fmt::Display) -> Self {
        CliError {
            kind: "io",
            message: format!("{}: {err}", path.display()),
            code: exit::INPUT,
        }
    }

    /// One-line JSON for the diagnostic stream.
    pub fn to_json(&self) -> String {
        serde_json::to_string(self).unwrap_or_else(|_| format!("{{\"kind\":\"{}\"}}", self.kind))
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}: {}", self.kind, self.message)
    }
}

impl std::error::Error for CliError {}

impl From<Error> for CliError {
    fn from(e: Error) -> Self {
        let (kind, code) = if e.is_numerical() || matches!(e, Error::NoValidQ { .. }) {
            ("numerical", exit::NUMERICAL)
        } else {
            match e {
                Error::Parse { .. } => ("parse", exit::INPUT),
                Error::Config { .. } => ("config", exit::INPUT),
                Error::Io(_) => ("io", exit::INPUT),
                _ => ("input", exit::INPUT),
            }
        };
        CliError {
            kind,
            message: e.to_string(),
            code,
        }
    }
}
