use thiserror::Error;

/// Failure classes, each with its own process exit code.
#[derive(Debug, Error)]
pub enum CliError {
    #[error("config error: {0}")]
    Config(String),
    #[error("{0}")]
    Parse(String),
    #[error("numerical error in {stage}: {source}")]
    Numerical {
        stage: &'static str,
        #[source]
        source: bfem::Error,
    },
    #[error("i/o error: {0}")]
    Io(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Config(_) | CliError::Io(_) => 2,
            CliError::Numerical { .. } => 3,
            CliError::Parse(_) => 4,
        }
    }
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        CliError::Io(e.to_string())
    }
}

/// Attaches a stage label to library errors. Mesh parse errors keep their
/// own class and bad arguments while setting up a problem count as config
/// errors.
pub trait Stage<T> {
    fn stage(self, stage: &'static str) -> Result<T, CliError>;
    fn setup(self, stage: &'static str) -> Result<T, CliError>;
}

impl<T> Stage<T> for bfem::Result<T> {
    fn stage(self, stage: &'static str) -> Result<T, CliError> {
        self.map_err(|source| match source {
            bfem::Error::Parse { .. } => CliError::Parse(source.to_string()),
            source => CliError::Numerical { stage, source },
        })
    }

    fn setup(self, stage: &'static str) -> Result<T, CliError> {
        self.map_err(|source| match source {
            bfem::Error::Parse { .. } => CliError::Parse(source.to_string()),
            bfem::Error::InvalidArgument(msg) | bfem::Error::UnsupportedElement(msg) => {
                CliError::Config(format!("{stage}: {msg}"))
            }
            source => CliError::Numerical { stage, source },
        })
    }
}
