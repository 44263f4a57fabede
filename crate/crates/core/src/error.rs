use thiserror::Error;

/// Errors raised by the kgamma library.
#[derive(Debug, Error)]
pub enum Error {
    /// A mathematical precondition failed (negative discriminant, index out of range, ...).
    #[error("domain error: {0}")]
    Domain(String),

    /// Working precision was not enough to produce a trustworthy result.
    #[error("precision exhausted at {bits} bits: {detail} (retry with --precision {hint})")]
    PrecisionExhausted { bits: u32, hint: u32, detail: String },

    /// Malformed or out-of-range configuration.
    #[error("config error: {0}")]
    Config(String),

    /// The tail rule of the gamma sequence has no closed-form sum.
    #[error("no closed-form tail sum for this gamma sequence")]
    NoClosedForm,

    #[error("internal inconsistency: {0}")]
    Internal(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl Error {
    pub(crate) fn precision(bits: u32, detail: impl Into<String>) -> Self {
        Error::PrecisionExhausted {
            bits,
            hint: bits.saturating_mul(2),
            detail: detail.into(),
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
