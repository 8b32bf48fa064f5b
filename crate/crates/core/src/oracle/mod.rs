//! Exhaustive checking of noninterference by enumeration.

mod kernel;
mod ni;

pub use kernel::Kernel;
pub use ni::{
    check_cond_indep, check_io_ni, check_io_ni_positions, search_i,
    search_i_positions, Bounds, Counterexample, IoVerdict, SearchOutcome,
};

use thiserror::Error;

use crate::semantics::SemanticsError;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum OracleError {
    #[error("{what} ({size}) exceeds the enumeration cap {cap}")]
    Cap { what: String, size: String, cap: u64 },
    #[error("unknown output `{0}`")]
    UnknownOutput(String),
    #[error("unknown input `{0}`")]
    UnknownInput(String),
    #[error("position {0} appears in more than one variable group")]
    Overlap(usize),
    #[error(transparent)]
    Semantics(#[from] SemanticsError),
}
