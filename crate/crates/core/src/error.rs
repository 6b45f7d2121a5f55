use alloc::string::String;
use alloc::vec::Vec;

/// Errors raised by the numeric core.
#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum Error {
    #[error("shape mismatch in {op}: {left:?} vs {right:?}")]
    ShapeMismatch {
        op: &'static str,
        left: Vec<usize>,
        right: Vec<usize>,
    },

    #[error("{op} expects a rank-{expected} tensor, got shape {got:?}")]
    Rank {
        op: &'static str,
        expected: usize,
        got: Vec<usize>,
    },

    #[error("{layer}: expected {expected} input channels, got {got}")]
    ChannelMismatch {
        layer: String,
        expected: usize,
        got: usize,
    },

    #[error("{what}: input {got_h}x{got_w} is smaller than the minimum {min}x{min}")]
    InputTooSmall {
        what: &'static str,
        min: usize,
        got_h: usize,
        got_w: usize,
    },

    #[error("missing parameter `{0}`")]
    MissingParam(String),

    #[error("non-finite {term} loss at step {step}")]
    NonFinite { term: &'static str, step: u64 },

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("{0} is empty")]
    Empty(&'static str),

    #[error("malformed data: {0}")]
    Format(String),
}

pub type Result<T, E = Error> = core::result::Result<T, E>;

pub(crate) fn invalid(msg: impl Into<String>) -> Error {
    Error::InvalidArgument(msg.into())
}
