use std::fmt;

/// Structured errors for every fallible operation in the crate.
#[derive(Debug, Clone, PartialEq)]
pub enum Error {
    /// A vector or parameter array had the wrong length.
    DimMismatch {
        context: &'static str,
        expected: usize,
        actual: usize,
    },
    /// Householder reflector constructed with a zero-norm vector.
    ZeroReflector,
    /// Permutation is not a bijection on `0..n`.
    InvalidPermutation { n: usize },
    /// Truncation asked to keep more components than exist.
    InvalidTruncation { keep: usize, len: usize },
    /// A VJP was replayed against a tape from a different cascade.
    TapeMismatch { detail: &'static str },
    /// Cross-entropy target index outside the class range.
    ClassOutOfRange { class: usize, classes: usize },
    /// A non-finite value appeared where one is not allowed.
    NonFinite { context: &'static str },
    /// Invalid model, task or run configuration.
    Config(String),
}

impl fmt::Display for Error {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Error::DimMismatch {
                context,
                expected,
                actual,
            } => write!(
                f,
                "dimension mismatch in {context}: expected {expected}, got {actual}"
            ),
            Error::ZeroReflector => write!(f, "Householder reflector has zero norm"),
            Error::InvalidPermutation { n } => {
                write!(f, "permutation is not a bijection on 0..{n}")
            }
            Error::InvalidTruncation { keep, len } => {
                write!(f, "cannot truncate length-{len} vector to {keep} components")
            }
            Error::TapeMismatch { detail } => write!(f, "stale or mismatched tape: {detail}"),
            Error::ClassOutOfRange { class, classes } => {
                write!(f, "target class {class} out of range for {classes} classes")
            }
            Error::NonFinite { context } => write!(f, "non-finite value in {context}"),
            Error::Config(msg) => write!(f, "invalid configuration: {msg}"),
        }
    }
}

impl std::error::Error for Error {}

pub type Result<T> = std::result::Result<T, Error>;
