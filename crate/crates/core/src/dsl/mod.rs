//! The gadget description language: parsing, unrolling and formatting.

pub mod ast;
mod elab;
pub mod flat;
pub mod lexer;
mod parser;
mod pretty;

pub use ast::{BaseType, InputDecl, Program, ShareFamily, ShareStructure, Span};
pub use elab::{typecheck, unroll, TypedProgram};
pub use flat::{expose_internals, free_inputs, Binding, CExpr, FlatProgram, FlatRhs, OutputSlot, Ty};
pub use parser::{Overrides, ORDER_OVERRIDE};
pub use pretty::pretty;

use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum DslError {
    #[error("{span}: syntax error: {msg}")]
    Syntax { span: Span, msg: String },
    #[error("{span}: invalid declaration: {msg}")]
    Header { span: Span, msg: String },
    #[error("{span}: unbound variable `{name}`")]
    Unbound { name: String, span: Span },
    #[error("{span}: `{name}` is not a static name (loop index, parameter or order)")]
    NonConstant { name: String, span: Span },
    #[error("{span}: loop bound uses non-constant `{name}`")]
    NonConstantBound { name: String, span: Span },
    #[error("{span}: `{name}` is bound more than once")]
    Duplicate { name: String, span: Span },
    #[error("{span}: type error: {msg}")]
    Type { span: Span, msg: String },
}

impl DslError {
    pub(crate) fn syntax(span: Span, msg: impl Into<String>) -> Self {
        DslError::Syntax {
            span,
            msg: msg.into(),
        }
    }

    pub(crate) fn header(span: Span, msg: impl Into<String>) -> Self {
        DslError::Header {
            span,
            msg: msg.into(),
        }
    }

    pub fn span(&self) -> Span {
        match self {
            DslError::Syntax { span, .. }
            | DslError::Header { span, .. }
            | DslError::Unbound { span, .. }
            | DslError::NonConstant { span, .. }
            | DslError::NonConstantBound { span, .. }
            | DslError::Duplicate { span, .. }
            | DslError::Type { span, .. } => *span,
        }
    }
}

/// Parses and checks a gadget. Names, loop bounds and types are validated by
/// a trial unrolling.
pub fn parse_gadget(src: &str) -> Result<Program, DslError> {
    parse_gadget_with(src, &Overrides::new())
}

/// Like [`parse_gadget`], with `order`/`param` values replaced by `overrides`.
pub fn parse_gadget_with(src: &str, overrides: &Overrides) -> Result<Program, DslError> {
    let program = parser::parse_program(src, overrides)?;
    typecheck(&program)?;
    Ok(program)
}

/// Parses, checks and unrolls in one step.
pub fn load_gadget(src: &str, overrides: &Overrides) -> Result<FlatProgram, DslError> {
    let program = parser::parse_program(src, overrides)?;
    Ok(unroll(&typecheck(&program)?))
}
