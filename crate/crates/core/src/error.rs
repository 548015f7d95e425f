use alloc::string::String;
use core::fmt;

pub type Result<T, E = Error> = core::result::Result<T, E>;

#[derive(Debug, Clone, PartialEq)]
pub enum Error {
    /// A box with non-positive or non-finite extent.
    InvalidBox,
    /// A value outside its allowed domain.
    InvalidArgument(String),
    DimensionMismatch {
        expected: usize,
        found: usize,
    },
    InsufficientSamples {
        needed: usize,
        found: usize,
    },
    EmptyPatch,
    NonFinite,
    /// Scoring was requested from a classifier with no exemplars.
    EmptyStore,
    /// The oracle has never been trained.
    Untrained,
    UnknownScenario(String),
    /// Feature extraction failed for a frame.
    Feature(String),
}

impl Error {
    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidArgument(msg.into())
    }
}

impl fmt::Display for Error {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Error::InvalidBox => f.write_str("box must have finite, positive width and height"),
            Error::InvalidArgument(msg) => write!(f, "invalid argument: {msg}"),
            Error::DimensionMismatch { expected, found } => {
                write!(f, "dimension mismatch: expected {expected}, found {found}")
            }
            Error::InsufficientSamples { needed, found } => {
                write!(f, "insufficient samples: need at least {needed}, got {found}")
            }
            Error::EmptyPatch => f.write_str("patch contains no pixels"),
            Error::NonFinite => f.write_str("non-finite value in feature vector"),
            Error::EmptyStore => f.write_str("classifier store is empty"),
            Error::Untrained => f.write_str("oracle has not been trained"),
            Error::UnknownScenario(name) => write!(f, "unknown scenario '{name}'"),
            Error::Feature(msg) => write!(f, "feature extraction failed: {msg}"),
        }
    }
}

impl core::error::Error for Error {}
