use nosig_core::LabError;

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    /// Malformed or inconsistent input.
    #[error("config error: {0}")]
    Config(String),
    /// A verification subcommand ran but its physics check failed.
    #[error("tolerance violation: {0}")]
    Tolerance(String),
    #[error("numerical failure: {0}")]
    Numerical(String),
    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
}

impl CliError {
    pub fn exit_code(&self) -> u8 {
        match self {
            CliError::Config(_) => 2,
            CliError::Tolerance(_) => 3,
            CliError::Numerical(_) | CliError::Io(_) => 1,
        }
    }
}

impl From<LabError> for CliError {
    fn from(e: LabError) -> Self {
        match e {
            LabError::Numerical(m) => CliError::Numerical(m),
            other => CliError::Config(other.to_string()),
        }
    }
}
