//! Command implementations behind the `eprsim` binary.
//!
//! Split out as a library so integration tests can drive the commands
//! directly; `main.rs` only does argument parsing and exit-code mapping.

pub mod commands;
pub mod config;

/// Errors surfaced by the CLI, split by exit code: usage, config and I/O
/// problems exit with 1, numerical failures with 2.
#[derive(Debug)]
pub enum CliError {
    Usage(String),
    Config {
        path: String,
        line: Option<usize>,
        message: String,
    },
    Io {
        path: String,
        message: String,
    },
    Numerical(String),
}

impl std::fmt::Display for CliError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            CliError::Usage(msg) => write!(f, "{msg}"),
            CliError::Config { path, line, message } => match line {
                Some(l) => write!(f, "{path}: line {l}: {message}"),
                None => write!(f, "{path}: {message}"),
            },
            CliError::Io { path, message } => write!(f, "{path}: {message}"),
            CliError::Numerical(msg) => write!(f, "numerical failure: {msg}"),
        }
    }
}

impl std::error::Error for CliError {}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Usage(_) | CliError::Config { .. } | CliError::Io { .. } => 1,
            CliError::Numerical(_) => 2,
        }
    }
}

impl From<eprsim_core::Error> for CliError {
    fn from(e: eprsim_core::Error) -> Self {
        use eprsim_core::Error::*;
        match e {
            InvalidArgument(_) | InconsistentState(_) | AboveThreshold { .. } => {
                CliError::Usage(e.to_string())
            }
            NumericalSingularity(_) | DegenerateConditioning(_) | FitFailure { .. } => {
                CliError::Numerical(e.to_string())
            }
        }
    }
}
