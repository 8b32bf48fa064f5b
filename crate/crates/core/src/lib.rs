//! Exact verification of probing-security properties for masked gadgets.

pub mod check;
pub mod corpus;
pub mod dsl;
pub mod oracle;
pub mod probes;
pub mod report;
pub mod semantics;
pub mod symbolic;
