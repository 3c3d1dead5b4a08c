use thiserror::Error;

/// Errors raised anywhere in the library.
#[derive(Debug, Error)]
pub enum Error {
    /// Malformed input text. `locus` names the line/field where parsing failed.
    #[error("parse error at {locus}: {message}")]
    Parse { locus: String, message: String },

    /// Input parsed but violates a structural invariant.
    #[error("invalid {what}: {message}")]
    Invalid { what: &'static str, message: String },

    #[error("unknown variable `{0}`")]
    UnknownVariable(String),

    #[error("unknown parameter `{0}`")]
    UnknownParameter(String),

    #[error("factor error: {0}")]
    Factor(String),

    #[error("inconsistent elimination plan: {0}")]
    Plan(String),

    #[error("evidence slot `{0}` is not bound")]
    UnboundSlot(String),

    /// The outputs of a circuit sum to zero, so no posterior exists.
    #[error("evidence has zero probability; posterior is undefined")]
    InconsistentEvidence,

    #[error("training diverged at epoch {epoch}: loss is {loss}")]
    Divergence { epoch: usize, loss: f64 },

    #[error("state space of {states} joint states exceeds the enumeration limit of {limit}")]
    TooLarge { states: u128, limit: u128 },

    #[error("scan resolution too coarse: {0}")]
    TooCoarse(String),

    #[error("target function is not monotone: {0}")]
    NotMonotone(String),

    #[error("unsupported activation `{0}`")]
    UnsupportedActivation(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl Error {
    pub(crate) fn invalid(what: &'static str, message: impl Into<String>) -> Self {
        Error::Invalid {
            what,
            message: message.into(),
        }
    }

    /// True for errors caused by bad user input (as opposed to runtime failures).
    pub fn is_usage(&self) -> bool {
        matches!(
            self,
            Error::Parse { .. }
                | Error::Invalid { .. }
                | Error::UnknownVariable(_)
                | Error::UnknownParameter(_)
                | Error::UnboundSlot(_)
                | Error::NotMonotone(_)
                | Error::UnsupportedActivation(_)
        )
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
