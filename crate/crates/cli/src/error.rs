use std::fmt;
use std::process::ExitCode;

use serde_json::json;

pub const EXIT_CONFIG: u8 = 2;
pub const EXIT_NUMERICAL: u8 = 3;
pub const EXIT_PROTOCOL: u8 = 4;

#[derive(Debug)]
pub enum CliError {
    Config {
        path: Option<String>,
        message: String,
    },
    Numerical(String),
    /// The run completed and wrote its report, but the protocol failed.
    Protocol(String),
    Io(String),
}

impl CliError {
    pub fn config(path: &str, message: impl Into<String>) -> Self {
        CliError::Config {
            path: Some(path.to_string()),
            message: message.into(),
        }
    }

    pub fn config_file(message: impl Into<String>) -> Self {
        CliError::Config {
            path: None,
            message: message.into(),
        }
    }

    pub fn exit_code(&self) -> ExitCode {
        ExitCode::from(match self {
            CliError::Config { .. } | CliError::Io(_) => EXIT_CONFIG,
            CliError::Numerical(_) => EXIT_NUMERICAL,
            CliError::Protocol(_) => EXIT_PROTOCOL,
        })
    }

    /// One-line JSON diagnostic for stderr.
    pub fn diagnostic(&self) -> String {
        let v = match self {
            CliError::Config { path, message } => {
                json!({"error": "config", "path": path, "message": message})
            }
            CliError::Numerical(m) => json!({"error": "numerical", "message": m}),
            CliError::Protocol(m) => json!({"error": "protocol", "message": m}),
            CliError::Io(m) => json!({"error": "io", "message": m}),
        };
        v.to_string()
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.diagnostic())
    }
}

impl From<cvqkd::Error> for CliError {
    fn from(e: cvqkd::Error) -> Self {
        match e {
            cvqkd::Error::Io(e) => CliError::Io(e.to_string()),
            other => CliError::Numerical(other.to_string()),
        }
    }
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        CliError::Io(e.to_string())
    }
}
