use thiserror::Error;

/// Errors shared by every module of the crate.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("frame is not unitary or grading is inconsistent: {0}")]
    InvalidFrame(String),
    #[error("invalid symplectic space: {0}")]
    InvalidSpace(String),
    #[error("eigenvalue near 1 without a real intersection direction (residual {0:e})")]
    DegenerateAngle(f64),
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
    #[error("curve is not invertible: {0}")]
    NotInvertible(String),
    #[error("profiles lie in different bands: {0}")]
    BandMismatch(String),
    #[error("phase lift failed: {0}")]
    LiftFailure(String),
    #[error("primitive gluing is ambiguous: {0}")]
    AmbiguousGluing(String),
    #[error("zero covector")]
    ZeroCovector,
    #[error("profile mismatch: {0}")]
    ProfileMismatch(String),
    #[error("invalid lift function: {0}")]
    InvalidLift(String),
    #[error("non-transverse intersection: {0}")]
    NonTransverse(String),
    #[error("obstruction detected: {0}")]
    ObstructionDetected(String),
    #[error("invalid complex: {0}")]
    InvalidComplex(String),
    #[error("invalid chain map: {0}")]
    InvalidMap(String),
    #[error("maps are not homotopic: {0}")]
    NotHomotopic(String),
    #[error("schema violation: {0}")]
    Schema(String),
}

pub type Result<T> = std::result::Result<T, Error>;
