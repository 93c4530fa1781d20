//! Files, parsing, output formats and the command line around `mandate-core`.

pub mod bundled;
pub mod cli;
pub mod dot;
pub mod error;
pub mod recipes;
pub mod sexp;
pub mod surface;

pub use error::{Failure, ParseError};
