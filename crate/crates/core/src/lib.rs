//! Abstract machines and control-flow graphs derived from small-step semantics.
//!
//! Terms, unification, the SOS/PAM/AM pipeline, abstractions, graph
//! exploration, pattern graphs and CFG-generator recipes. No IO here.

#![no_std]

extern crate alloc;
#[cfg(test)]
extern crate std;

pub mod term;
pub mod unify;
pub mod order;
pub mod semantics;
pub mod pam;
pub mod am;
pub mod abstraction;
pub mod cfg;
pub mod pattern;
pub mod codegen;
pub mod languages;
pub mod analyses;
pub mod laws;

pub use term::{Conf, MatchType, State, Sym, Tail, Term, VarId};
