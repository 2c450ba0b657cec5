use std::path::PathBuf;

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("malformed scenario: {0}")]
    Parse(String),
    #[error("invalid scenario: {0}")]
    Validation(String),
    #[error("step {step}: {source}")]
    Solver {
        step: usize,
        #[source]
        source: gradplast::Error,
    },
    #[error("{0}")]
    Numerical(String),
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

impl CliError {
    pub fn io(path: impl Into<PathBuf>) -> impl FnOnce(std::io::Error) -> CliError {
        let path = path.into();
        move |source| CliError::Io { path, source }
    }

    /// Process exit status: 2 invalid input, 3 numerical failure, 4 I/O.
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Parse(_) | CliError::Validation(_) => 2,
            CliError::Solver { source, .. } => match source {
                gradplast::Error::InvalidParams(_) | gradplast::Error::InfeasibleBc(_) => 2,
                _ => 3,
            },
            CliError::Numerical(_) => 3,
            CliError::Io { .. } => 4,
        }
    }
}
