use thiserror::Error;

/// Runner errors, mapped onto the CLI exit-code contract:
/// 0 = all checks pass, 2 = configuration error, 3 = bound or property
/// violation, 1 = everything else.
#[derive(Debug, Error)]
pub enum LabError {
    #[error("config: {0}")]
    Config(String),

    #[error("violation: {0}")]
    Violation(String),

    #[error("io: {0}")]
    Io(String),
}

impl LabError {
    pub fn exit_code(&self) -> i32 {
        match self {
            LabError::Config(_) => 2,
            LabError::Violation(_) => 3,
            LabError::Io(_) => 1,
        }
    }

    pub fn config(msg: impl Into<String>) -> LabError {
        LabError::Config(msg.into())
    }
}

impl From<committee_core::CoreError> for LabError {
    fn from(err: committee_core::CoreError) -> Self {
        LabError::Config(err.to_string())
    }
}

impl From<std::io::Error> for LabError {
    fn from(err: std::io::Error) -> Self {
        LabError::Io(err.to_string())
    }
}

pub type Result<T> = std::result::Result<T, LabError>;
