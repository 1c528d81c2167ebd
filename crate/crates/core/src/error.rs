use thiserror::Error;

/// Errors produced by the core crate.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("parameter `{name}` out of domain: {value}")]
    Domain { name: &'static str, value: f64 },

    #[error("invalid schedule: {0}")]
    InvalidSchedule(&'static str),

    #[error("degenerate schedule: {0}")]
    DegenerateSchedule(&'static str),

    #[error("conditioning event has zero probability")]
    ZeroMass,

    #[error("malformed transcript: {0}")]
    MalformedTranscript(&'static str),

    #[error("codeword search in round {round} passed the {limit}-row limit")]
    SearchOverflow { round: usize, limit: u64 },

    #[error("codebook row for round {round} was never realized")]
    UnrealizedRow { round: usize },

    #[error("communication budget too small: derived m = {m} must exceed 10")]
    BudgetTooSmall { m: f64 },

    #[error("bump support does not fit in the unit cube (m = {m}, d = {d})")]
    SupportOverflow { m: f64, d: usize },

    #[error("degenerate marginal")]
    DegenerateMarginal,

    #[error("sample length mismatch: expected {expected}, got {got}")]
    LengthMismatch { expected: usize, got: usize },
}

pub type Result<T> = core::result::Result<T, Error>;

pub(crate) fn domain(name: &'static str, value: f64) -> Error {
    Error::Domain { name, value }
}
