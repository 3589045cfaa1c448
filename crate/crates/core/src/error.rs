use alloc::string::String;

use thiserror::Error;

/// What went wrong while reading a clause or schema file.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum ParseErrorKind {
    #[error("{0}")]
    Syntax(String),
    #[error("unknown predicate `{0}`")]
    UnknownPredicate(String),
    #[error("repeated literal `{0}`")]
    RepeatedLiteral(String),
    #[error("predicate `{0}` used with the wrong number of variables")]
    ArityMismatch(String),
    #[error("clause weight must be nonnegative, got {0}")]
    NegativeWeight(f64),
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("line {line}, column {column}: {kind}")]
    Parse {
        line: usize,
        column: usize,
        kind: ParseErrorKind,
    },
    #[error("invalid schema: {0}")]
    Schema(String),
    #[error("invalid clause: {0}")]
    Clause(String),
    #[error("literal `{0}` has no column in the target layout")]
    Unresolvable(String),
    #[error("shape mismatch in {op}: {left:?} vs {right:?}")]
    Shape {
        op: &'static str,
        left: (usize, usize),
        right: (usize, usize),
    },
    #[error("index {index} out of range (len {len})")]
    IndexOutOfRange { index: usize, len: usize },
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
    #[error("instance too large: {0}")]
    TooLarge(String),
}

pub type Result<T> = core::result::Result<T, Error>;

macro_rules! invalid {
    ($($arg:tt)*) => {
        $crate::error::Error::InvalidArgument(alloc::format!($($arg)*))
    };
}
pub(crate) use invalid;
