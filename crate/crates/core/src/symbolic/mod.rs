//! Symbolic verification: linear normal forms, uniform-bijection rewriting
//! and proof certificates.

pub mod compose;
pub mod form;
mod state;
mod uniformize;

pub use form::{Atom, BoolTerm, LinearForm, Monomial, Opaque, SymValue};
pub use state::{eval_sym, to_symbolic, SymbolicState};
pub use uniformize::{
    needed_inputs, replay, uniformize, verify_io_ni_symbolic, Certificate, Missed, ProbeState, Rewrite, Rule,
    RuleStep, SymbolicStatus, SymbolicVerdict, Uniformized, UniformizeOptions,
};

pub use compose::{compose_loop, compose_sequential, weaken, wiring_by_name, ComposeError, Iteration, NiSummary, Source, Wiring};
pub(crate) use uniformize::closing_steps;

use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum SymbolicError {
    #[error("cannot normalize `{var}`: {msg}")]
    Unsupported { var: String, msg: String },
    #[error("unknown variable `{0}`")]
    UnknownVariable(String),
    #[error("certificate step {step} does not replay: {msg}")]
    Replay { step: usize, msg: String },
}
