use alloc::string::String;

/// Errors raised by the core model.
#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum Error {
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },
    #[error("empty input: {0}")]
    Empty(&'static str),
    #[error("zero displacement between UAV and gNB")]
    ZeroDisplacement,
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
    #[error("link state {0} is not valid here")]
    InvalidState(&'static str),
    #[error("model format version {found} is not supported (expected {expected})")]
    VersionMismatch { expected: u32, found: u32 },
    #[error("invalid record: {0}")]
    InvalidRecord(String),
}

pub type Result<T, E = Error> = core::result::Result<T, E>;

pub(crate) fn check_len(expected: usize, got: usize) -> Result<()> {
    if expected == got {
        Ok(())
    } else {
        Err(Error::DimensionMismatch { expected, got })
    }
}
