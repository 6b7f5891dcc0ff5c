use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid dimension: {0}")]
    InvalidDimension(String),
    #[error("minimum separation is undefined for fewer than two frequencies")]
    UndefinedSeparation,
    #[error("invalid configuration: {0}")]
    InvalidConfiguration(String),
    #[error("synthesis failed: {0}")]
    SynthesisFailure(String),
    #[error("numerical failure: {0}")]
    NumericalFailure(String),
    #[error("ill-posed recovery: {0}")]
    IllPosedRecovery(String),
    #[error("certificate construction failed: {0}")]
    CertificateFailure(String),
    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),
}
