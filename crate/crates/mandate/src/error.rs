//! Error types and the exit codes they map to.

use thiserror::Error;

/// A syntax error at a 1-based line and column.
#[derive(Clone, Debug, PartialEq, Eq, Error)]
#[error("{line}:{col}: {msg}")]
pub struct ParseError {
    pub line: usize,
    pub col: usize,
    pub msg: String,
}

impl ParseError {
    pub fn new(line: usize, col: usize, msg: impl Into<String>) -> ParseError {
        ParseError { line, col, msg: msg.into() }
    }
}

#[derive(Debug, Error)]
pub enum Failure {
    /// Bad input: unknown names, syntax errors, invalid languages or programs.
    #[error("{0}")]
    Validation(String),
    /// The semantics cannot be turned into an abstract machine.
    #[error("{0}")]
    Conversion(String),
    /// A budget ran out and `--strict` was given.
    #[error("{0}")]
    Truncated(String),
    #[error("{0}")]
    Codegen(String),
    #[error("{0}")]
    Io(#[from] std::io::Error),
}

impl Failure {
    pub fn exit_code(&self) -> i32 {
        match self {
            Failure::Validation(_) | Failure::Io(_) => 2,
            Failure::Conversion(_) => 3,
            Failure::Truncated(_) => 4,
            Failure::Codegen(_) => 5,
        }
    }
}

impl From<ParseError> for Failure {
    fn from(e: ParseError) -> Failure {
        Failure::Validation(e.to_string())
    }
}
