use thiserror::Error;

/// Errors produced by the solver library.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum BcosError {
    #[error("invalid truncation bounds: a = {a} must be below b = {b}")]
    InvalidBounds { a: f64, b: f64 },
    #[error("invalid size: {0}")]
    InvalidSize(String),
    #[error("length mismatch: expected {expected}, got {got}")]
    LengthMismatch { expected: usize, got: usize },
    #[error("problem `{problem}` does not supply the {required} required by this scheme")]
    TierUnavailable { problem: String, required: &'static str },
    #[error("unsupported power of the Brownian increment: {0} (only 0, 1, 2)")]
    UnsupportedPower(u32),
    #[error("invalid theta parameters: {0}")]
    InvalidTheta(String),
    #[error("invalid problem parameters: {0}")]
    InvalidParams(String),
    #[error("terminal fixed point for z did not contract at x = {x}")]
    TerminalFixedPointDivergence { x: f64 },
    #[error("time index {index} out of range 0..={max}")]
    IndexOutOfRange { index: usize, max: usize },
    #[error("coarse step count {coarse} does not divide fine step count {fine}")]
    NonDivisor { coarse: usize, fine: usize },
    #[error("problem `{0}` has no analytic decoupling fields")]
    MissingAnalyticFields(String),
    #[error("step count mismatch: solution has {solution} steps, requested {requested}")]
    StepCountMismatch { solution: usize, requested: usize },
    #[error("path set shape mismatch: {0}")]
    ShapeMismatch(String),
    #[error("Riccati solution blew up at t = {t}")]
    RiccatiBlowup { t: f64 },
}

pub type Result<T> = std::result::Result<T, BcosError>;
