use thiserror::Error;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("invalid config (line {line}, column {column}): {message}")]
    Config {
        line: usize,
        column: usize,
        message: String,
    },
    #[error("solver failure: {0}")]
    Solver(nfsf_core::Error),
    #[error("i/o: {0}")]
    Io(#[from] std::io::Error),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Config { .. } => 2,
            CliError::Solver(_) => 3,
            CliError::Io(_) => 1,
        }
    }
}

impl From<nfsf_core::Error> for CliError {
    fn from(e: nfsf_core::Error) -> Self {
        match e {
            nfsf_core::Error::Io(io) => CliError::Io(io),
            other => CliError::Solver(other),
        }
    }
}
