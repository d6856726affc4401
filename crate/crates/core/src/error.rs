use thiserror::Error;

/// Errors produced by the library.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    /// A model, rule, or configuration value violates its invariants.
    #[error("invalid parameter `{name}`: {reason}")]
    InvalidParameter { name: &'static str, reason: String },

    /// An observation lies outside the support of a model.
    #[error("observation {value} is outside the support of the {family} family")]
    Domain { family: &'static str, value: f64 },

    #[error("length mismatch: expected {expected}, got {got}")]
    LengthMismatch { expected: usize, got: usize },

    #[error("index {index} out of range for {len} streams")]
    IndexOutOfRange { index: usize, len: usize },

    #[error("operation not supported for the {family} family: {what}")]
    Unsupported {
        family: &'static str,
        what: &'static str,
    },

    /// A conditional metric had no trial in its conditioning event.
    #[error("{metric} is undefined: no trial satisfies its conditioning event ({event})")]
    EmptyConditioning {
        metric: &'static str,
        event: &'static str,
    },

    /// A metric/rule pairing outside the range where the error bounds hold.
    #[error("{metric} is not supported for {rule}: {reason}")]
    Restricted {
        metric: &'static str,
        rule: &'static str,
        reason: &'static str,
    },

    /// Calibration search exhausted its cap without meeting the targets.
    #[error("calibration failed: {0}")]
    Calibration(String),

    #[error("{context}: {source}")]
    Context {
        context: String,
        #[source]
        source: Box<Error>,
    },

    #[error("thread pool: {0}")]
    Pool(String),
}

impl Error {
    pub(crate) fn invalid(name: &'static str, reason: impl Into<String>) -> Self {
        Error::InvalidParameter {
            name,
            reason: reason.into(),
        }
    }

    pub fn context(self, context: impl Into<String>) -> Self {
        Error::Context {
            context: context.into(),
            source: Box::new(self),
        }
    }

    /// The innermost error, with any context wrappers removed.
    pub fn root(&self) -> &Error {
        match self {
            Error::Context { source, .. } => source.root(),
            other => other,
        }
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
