use std::fmt;

/// Failure of a command, classified by exit status.
#[derive(Debug, thiserror::Error)]
pub enum CliError {
    /// Malformed command line.
    #[error("usage error: {0}")]
    Usage(String),
    /// Invalid configuration, input file or checkpoint.
    #[error("config error: {0}")]
    Config(String),
    /// Numerical failure or I/O failure while producing outputs.
    #[error("runtime error: {0}")]
    Runtime(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Usage(_) | CliError::Config(_) => 1,
            CliError::Runtime(_) => 2,
        }
    }

    pub(crate) fn config(context: impl fmt::Display) -> impl FnOnce(advhedge_core::Error) -> CliError {
        move |e| CliError::Config(format!("{context}: {e}"))
    }

    pub(crate) fn runtime(context: impl fmt::Display) -> impl FnOnce(advhedge_core::Error) -> CliError {
        move |e| CliError::Runtime(format!("{context}: {e}"))
    }

    pub(crate) fn write(path: &std::path::Path) -> impl FnOnce(std::io::Error) -> CliError + '_ {
        move |e| CliError::Runtime(format!("cannot write {}: {e}", path.display()))
    }
}
