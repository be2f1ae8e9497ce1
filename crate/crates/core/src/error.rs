use alloc::string::String;

/// Errors raised anywhere in the numerical core.
#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum Error {
    #[error("shape mismatch in {op}: {detail}")]
    ShapeMismatch { op: &'static str, detail: String },

    #[error("non-finite value produced or consumed by {op}")]
    NonFinite { op: &'static str },

    #[error("backward root must be a scalar, got {numel} elements")]
    NonScalarRoot { numel: usize },

    #[error("unknown node id {0}")]
    UnknownNode(usize),

    #[error("empty input to {0}")]
    EmptyInput(&'static str),

    #[error("label {label} outside [0, {classes})")]
    LabelOutOfRange { label: usize, classes: usize },

    #[error("length mismatch: expected {expected}, found {found}")]
    LengthMismatch { expected: usize, found: usize },

    #[error("correlation undefined for constant input")]
    ConstantInput,

    #[error("degenerate sample for t-test: {0}")]
    DegenerateSample(&'static str),

    #[error("invalid configuration: {0}")]
    ConfigInvalid(String),
}

pub type Result<T, E = Error> = core::result::Result<T, E>;

pub(crate) fn shape_err(op: &'static str, detail: String) -> Error {
    Error::ShapeMismatch { op, detail }
}

pub(crate) fn config_err(msg: impl Into<String>) -> Error {
    Error::ConfigInvalid(msg.into())
}
