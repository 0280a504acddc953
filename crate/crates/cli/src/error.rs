use std::error::Error as _;
use std::fmt;

use riswie::RiswieError;

/// CLI failure, grouped by exit code.
#[derive(Debug)]
pub enum CliError {
    /// Unreadable or malformed input (exit 2).
    Parse(String),
    /// Bad configuration or incompatible dimensions (exit 3).
    Config(String),
    /// An iterative solver gave up (exit 4).
    Numerical(String),
}

impl CliError {
    pub fn code(&self) -> i32 {
        match self {
            CliError::Parse(_) => 2,
            CliError::Config(_) => 3,
            CliError::Numerical(_) => 4,
        }
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CliError::Parse(m) => write!(f, "parse error: {m}"),
            CliError::Config(m) => write!(f, "error: {m}"),
            CliError::Numerical(m) => write!(f, "numerical error: {m}"),
        }
    }
}

fn root_cause(e: &RiswieError) -> &RiswieError {
    match e {
        RiswieError::Pair { source, .. } => root_cause(source),
        _ => e,
    }
}

impl From<RiswieError> for CliError {
    fn from(e: RiswieError) -> Self {
        match root_cause(&e) {
            RiswieError::NoConvergence { .. } => CliError::Numerical(e.to_string()),
            _ => CliError::Config(e.to_string()),
        }
    }
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        let mut msg = e.to_string();
        if let Some(src) = e.source() {
            msg = format!("{msg}: {src}");
        }
        CliError::Parse(msg)
    }
}

pub type CliResult<T> = Result<T, CliError>;
