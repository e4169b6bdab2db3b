use thiserror::Error;

#[derive(Debug, Error)]
pub enum NcgError {
    #[error("invalid algebra profile: {0}")]
    Profile(String),
    #[error("shape mismatch: {0}")]
    Shape(String),
    #[error("element is not unitary (defect {0:.3e})")]
    NotUnitary(f64),
    #[error("diagram failed validation: {0}")]
    InvalidDiagram(String),
    #[error("invalid Bratteli arrow: {0}")]
    InvalidArrow(String),
    #[error("classification failed at step `{step}`: {detail}")]
    Classification { step: &'static str, detail: String },
    #[error("invalid lift: {0}")]
    InvalidLift(String),
    #[error("precondition failed: {0}")]
    Precondition(String),
    #[error("parse error at `{path}`: {message}")]
    Parse { path: String, message: String },
    #[error("unresolved reference: {0}")]
    Reference(String),
    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, NcgError>;
