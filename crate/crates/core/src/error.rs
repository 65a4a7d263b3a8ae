use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("width mismatch: {0} vs {1}")]
    WidthMismatch(u32, u32),
    #[error("invalid distribution: {0}")]
    InvalidDistribution(String),
    #[error("width {0} exceeds the supported maximum {1}")]
    WidthTooLarge(u32, u32),
    #[error("{count} flat sources exceed the enumeration cap {cap}")]
    CountExceedsCap { count: u128, cap: u64 },
    #[error("unsupported field width {0}")]
    UnsupportedWidth(u32),
    #[error("parameter out of range: {0}")]
    Range(String),
    #[error("missing claim: {0}")]
    MissingClaim(String),
    #[error("precondition violated: {0}")]
    Precondition(String),
    #[error("infeasible at desk scale: {0}")]
    Infeasible(String),
    #[error("unsupported by this oracle: {0}")]
    Unsupported(String),
    #[error("malformed spec: {0}")]
    Spec(String),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
