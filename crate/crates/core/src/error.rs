use thiserror::Error;

#[derive(Debug, Error)]
pub enum SimError {
    #[error("domain error: {0}")]
    Domain(String),
    #[error("config error: {0}")]
    Config(String),
    #[error("numeric error: {0}")]
    Numeric(String),
    #[error("io error: {0}")]
    Io(#[from] std::io::Error),
}

impl SimError {
    /// Process exit code for this error class.
    pub fn exit_code(&self) -> i32 {
        match self {
            SimError::Config(_) | SimError::Domain(_) => 2,
            SimError::Numeric(_) => 3,
            SimError::Io(_) => 1,
        }
    }
}

pub type Result<T> = std::result::Result<T, SimError>;

pub(crate) fn config_err(msg: impl Into<String>) -> SimError {
    SimError::Config(msg.into())
}
