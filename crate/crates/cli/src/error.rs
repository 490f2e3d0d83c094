use thiserror::Error;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("config error: {0}")]
    Config(String),
    #[error("numerical failure: {0}")]
    Numeric(needlets::Error),
    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
}

impl From<needlets::Error> for CliError {
    fn from(e: needlets::Error) -> Self {
        match e {
            needlets::Error::Io(io) => CliError::Io(io),
            needlets::Error::InvalidConfig(m) => CliError::Config(m),
            other => CliError::Numeric(other),
        }
    }
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Config(_) => 2,
            CliError::Numeric(_) => 3,
            CliError::Io(_) => 4,
        }
    }
}
