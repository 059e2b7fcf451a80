use alloc::string::String;

/// Errors raised by the analysis routines.
///
/// Numerical outcomes that are part of a normal run (blowup, undecided
/// classification, truncation warnings) are reported through result types,
/// not through this enum.
#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum Error {
    #[error("invalid parameter `{name}`: {reason}")]
    InvalidParameter { name: &'static str, reason: String },

    #[error("grid mismatch: {0}")]
    GridMismatch(String),

    #[error("non-finite value in {0}")]
    NonFinite(&'static str),

    #[error("no checkpoint at t = {t} (needed for s = {s})")]
    MissingCheckpoint { t: f64, s: f64 },

    #[error("precondition failed: {0}")]
    Precondition(String),
}

pub type Result<T> = core::result::Result<T, Error>;

pub(crate) fn invalid(name: &'static str, reason: impl Into<String>) -> Error {
    Error::InvalidParameter {
        name,
        reason: reason.into(),
    }
}
