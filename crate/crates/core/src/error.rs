use thiserror::Error;

/// Errors shared by every module. Partiality is always surfaced as a
/// distinguishable error value, never as a panic or a silent wrong answer.
#[derive(Debug, Clone, Error, PartialEq, Eq)]
pub enum Error {
    /// A step budget ran out before the operation could certify a result.
    /// This is the honest signal for genuinely partial operations.
    #[error("budget exceeded in {op}: {detail}")]
    BudgetExceeded { op: &'static str, detail: String },

    /// An input violated a documented precondition.
    #[error("contract violation in {op}: {detail}")]
    ContractViolation { op: &'static str, detail: String },

    /// A structural invariant failed; carries a counterexample description.
    #[error("invariant violation in {op}: {detail}")]
    InvariantViolation { op: &'static str, detail: String },

    /// Accumulation input whose total mass never crosses 1: the undefined case.
    #[error("insufficient mass: {0}")]
    InsufficientMass(String),

    /// Text input rejected; `pos` is a byte offset into the input.
    #[error("parse error at byte {pos}: {msg}")]
    Parse { pos: usize, msg: String },

    /// Static sort mismatch in a combinator program.
    #[error("sort error: {0}")]
    Sort(String),
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    pub fn budget(op: &'static str, detail: impl Into<String>) -> Self {
        Error::BudgetExceeded { op, detail: detail.into() }
    }
    pub fn contract(op: &'static str, detail: impl Into<String>) -> Self {
        Error::ContractViolation { op, detail: detail.into() }
    }
    pub fn invariant(op: &'static str, detail: impl Into<String>) -> Self {
        Error::InvariantViolation { op, detail: detail.into() }
    }
}
