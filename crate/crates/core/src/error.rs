use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

/// Contract violations and degenerate inputs reported by the library.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("invalid effect: eigenvalues ({min}, {max}) outside [0, 1]")]
    InvalidEffect { min: f64, max: f64 },

    #[error("invalid state: {0}")]
    InvalidState(String),

    #[error("invalid parameters: {0}")]
    InvalidParams(String),

    #[error("invalid POVM: {0}")]
    InvalidPovm(String),

    #[error("sigma3 marginal trivial (|A| = {0:e})")]
    TrivialSigma3Marginal(f64),

    #[error("interference marginal trivial (|N| = {0:e})")]
    TrivialInterferenceMarginal(f64),

    #[error("direction undefined: |N| = {0:e}")]
    DirectionUndefined(f64),

    #[error("perpendicularity violated: a.b = {0:e}")]
    PerpendicularityViolated(f64),

    #[error("internal consistency error: {0}")]
    Inconsistent(String),
}
