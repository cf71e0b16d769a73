use gsqg_core::Error;
use serde_json::json;

/// Failure classes with their process exit codes.
#[derive(Debug)]
pub enum CliError {
    /// Bad configuration or parameters (exit 2).
    Validation(String),
    /// Numerical failure or a tolerance miss (exit 3).
    Numerical(String),
    /// A required upstream artifact is missing, stale, or unusable (exit 4).
    Prerequisite(String),
    /// Any other I/O failure (exit 1).
    Io(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Validation(_) => 2,
            CliError::Numerical(_) => 3,
            CliError::Prerequisite(_) => 4,
            CliError::Io(_) => 1,
        }
    }

    pub fn kind(&self) -> &'static str {
        match self {
            CliError::Validation(_) => "validation",
            CliError::Numerical(_) => "numerical",
            CliError::Prerequisite(_) => "missing-prerequisite",
            CliError::Io(_) => "io",
        }
    }

    pub fn message(&self) -> &str {
        match self {
            CliError::Validation(m) | CliError::Numerical(m) | CliError::Prerequisite(m) | CliError::Io(m) => m,
        }
    }

    pub fn to_json(&self, command: &str) -> String {
        json!({ "error": self.kind(), "exit_code": self.exit_code(), "command": command, "message": self.message() }).to_string()
    }
}

impl std::fmt::Display for CliError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "{}: {}", self.kind(), self.message())
    }
}

impl From<Error> for CliError {
    fn from(e: Error) -> Self {
        let m = e.to_string();
        match e {
            Error::InvalidParameter(_) | Error::GridMismatch(_) | Error::ZeroMean { .. } => CliError::Validation(m),
            Error::Unresolved(_) | Error::Quadrature { .. } | Error::Eigen(_) | Error::BranchLoss(_) => CliError::Numerical(m),
            Error::Precondition(_) | Error::Parse(_) | Error::Json(_) => CliError::Prerequisite(m),
            Error::Io(_) => CliError::Io(m),
        }
    }
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        CliError::Io(e.to_string())
    }
}

impl From<serde_json::Error> for CliError {
    fn from(e: serde_json::Error) -> Self {
        CliError::Prerequisite(e.to_string())
    }
}
