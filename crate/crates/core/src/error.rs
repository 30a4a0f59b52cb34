use thiserror::Error;

/// Errors produced by simulator construction and analytic evaluation.
#[derive(Debug, Error)]
pub enum CoreError {
    /// A parameter is outside its documented range.
    #[error("configuration: {0}")]
    Config(String),

    /// An exact oracle was asked for an instance beyond its enumeration
    /// limits.
    #[error("enumeration limit: {0}")]
    EnumerationLimit(String),

    /// Numeric integration failed to reach its tolerance.
    #[error("numeric: {0}")]
    Numeric(String),

    /// A pool file could not be read or parsed.
    #[error("pool file: {0}")]
    PoolFile(String),

    /// Oracle-gap recovery is undefined when the oracle rate does not
    /// exceed the single-proposal rate.
    #[error("recovery undefined: p_oracle ({p_oracle}) <= p1 ({p1})")]
    UndefinedRecovery { p1: f64, p_oracle: f64 },
}

pub type Result<T> = std::result::Result<T, CoreError>;

impl CoreError {
    pub fn config(msg: impl Into<String>) -> Self {
        CoreError::Config(msg.into())
    }
}
