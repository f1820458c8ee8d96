use alloc::string::String;

pub type Result<T, E = Error> = core::result::Result<T, E>;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum Error {
    #[error("configuration error: {0}")]
    Config(String),
    #[error("dimension mismatch in {context}: expected {expected}, got {got}")]
    Dimension {
        context: &'static str,
        expected: usize,
        got: usize,
    },
    /// Non-finite loss, gradient or target during an update.
    #[error("training fault in {module}: {message}")]
    TrainingFault {
        module: &'static str,
        message: String,
    },
    #[error("placement failed after {attempts} attempts: {scene}")]
    Placement { attempts: usize, scene: String },
    #[error("joint action space of size {size} exceeds enumeration cap {cap}")]
    EnumerationCap { size: u128, cap: u128 },
    #[error("malformed weights: {0}")]
    Codec(String),
    #[error("internal error: {0}")]
    Internal(String),
}

impl Error {
    pub(crate) fn fault(module: &'static str, message: impl Into<String>) -> Self {
        Error::TrainingFault {
            module,
            message: message.into(),
        }
    }
}
