use thiserror::Error;

use crate::randomness::RandomError;

/// An out-of-range or inconsistent parameter.
#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("invalid {field}: {reason}")]
pub struct ParamError {
    pub field: &'static str,
    pub reason: String,
}

impl ParamError {
    pub fn new(field: &'static str, reason: impl Into<String>) -> Self {
        Self {
            field,
            reason: reason.into(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum SketchError {
    #[error("sketch has already output fail; no further processing is permitted")]
    AlreadyFailed,
    #[error("stream exceeds its declared bound of {bound} items")]
    BoundExceeded { bound: u64 },
    #[error(transparent)]
    Random(#[from] RandomError),
}

/// A [`SketchError`] raised at a 1-based stream position.
#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("at stream item {index}: {source}")]
pub struct StreamError {
    pub index: u64,
    #[source]
    pub source: SketchError,
}
