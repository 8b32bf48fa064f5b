//! Exact kernel semantics of unrolled gadgets over Z_q.

mod dist;
mod eval;
mod value;

pub use dist::{rational_string, DistributionJson, FiniteDistribution, SupportEntry};
pub use eval::{
    assignment_map, assignment_vector, domain, enumerate_assignments, eval_expr, interpret,
    interpret_vector, sample_weight, Assignment, Compiled, DEFAULT_CAP,
};
pub use value::{Modulus, Value};

use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum SemanticsError {
    #[error("enumeration of {states} random-sample states exceeds the cap of {cap}")]
    CapExceeded { states: String, cap: u64 },
    #[error("no value for input `{0}`")]
    MissingInput(String),
    #[error("unbound variable `{0}`")]
    Unbound(String),
    #[error("ill-typed evaluation: {0}")]
    Type(String),
    #[error("conditioning event has probability zero")]
    UndefinedConditional,
    #[error("position {position} out of range for tuples of width {width}")]
    InvalidPosition { position: usize, width: usize },
    #[error("probabilities must be non-negative and sum to one")]
    NotNormalized,
}
