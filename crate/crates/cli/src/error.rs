use brittle_core::Error;

pub type CliResult<T> = Result<T, CliError>;

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    /// Bad or missing flags.
    #[error("{0}")]
    Usage(String),
    /// Inputs that are present but unusable.
    #[error("{0}")]
    Data(String),
    #[error(transparent)]
    Core(#[from] Error),
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        CliError::Core(e.into())
    }
}

impl From<serde_json::Error> for CliError {
    fn from(e: serde_json::Error) -> Self {
        CliError::Core(e.into())
    }
}

impl From<csv::Error> for CliError {
    fn from(e: csv::Error) -> Self {
        CliError::Data(e.to_string())
    }
}

impl CliError {
    /// 1 usage, 2 data or format, 3 runtime.
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Usage(_) => 1,
            CliError::Data(_) => 2,
            CliError::Core(e) => match e {
                Error::InvalidArgument(_)
                | Error::Format { .. }
                | Error::Checkpoint(_)
                | Error::Io(_)
                | Error::Json(_) => 2,
                Error::UndefinedCorrelation(_) | Error::Transport(_) | Error::Protocol(_) => 3,
            },
        }
    }
}
