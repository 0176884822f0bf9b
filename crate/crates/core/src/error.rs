use thiserror::Error;

/// Errors shared by every module of the toolkit.
#[derive(Debug, Error)]
pub enum Error {
    /// A constructor or operation received an argument outside its contract.
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    /// A field was passed in the wrong representation (time vs frequency).
    #[error("domain mismatch: expected {expected} field, got {got}")]
    DomainMismatch {
        expected: &'static str,
        got: &'static str,
    },

    /// Two values that must live on the same grid do not.
    #[error("grid mismatch: {0}")]
    GridMismatch(String),

    /// An input is degenerate (zero energy, all-zero spectrum, ...).
    #[error("degenerate input: {0}")]
    DegenerateInput(String),

    /// The requested duration budget admits no transfer-function parameter.
    #[error("no admissible bound: {0}")]
    NoAdmissibleBound(String),

    /// Squaring the envelope would push spectral content past the grid edge.
    #[error("aliasing risk: {0}")]
    AliasingRisk(String),

    /// Array shapes disagree.
    #[error("shape mismatch: {0}")]
    ShapeMismatch(String),
}

pub type Result<T> = std::result::Result<T, Error>;
