//! Loop-free form of a gadget: every variable is bound once, in order.

use std::collections::BTreeSet;
use std::fmt;

use serde::Serialize;

use super::ast::{BinOp, InputDecl, ShareStructure, Span};

/// Value types. `Index` values only appear as folded constants.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize)]
pub enum Ty {
    Ring,
    Bool,
    Index,
    Tuple(Vec<Ty>),
}

impl fmt::Display for Ty {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Ty::Ring => write!(f, "ring"),
            Ty::Bool => write!(f, "bool"),
            Ty::Index => write!(f, "index"),
            Ty::Tuple(ts) => {
                write!(f, "(")?;
                for (i, t) in ts.iter().enumerate() {
                    if i > 0 {
                        write!(f, ", ")?;
                    }
                    write!(f, "{t}")?;
                }
                write!(f, ")")
            }
        }
    }
}

/// Expression over concrete variable names.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub enum CExpr {
    Var(String),
    /// Ring literal, reduced modulo `q` at evaluation time.
    Const(u64),
    Index(i64),
    Bool(bool),
    Tuple(Vec<CExpr>),
    /// 0-based projection.
    Proj(usize, Box<CExpr>),
    Neg(Box<CExpr>),
    Bin(BinOp, Box<CExpr>, Box<CExpr>),
    Ite(Box<CExpr>, Box<CExpr>, Box<CExpr>),
}

impl CExpr {
    pub fn var(name: impl Into<String>) -> CExpr {
        CExpr::Var(name.into())
    }

    pub fn bin(op: BinOp, a: CExpr, b: CExpr) -> CExpr {
        CExpr::Bin(op, Box::new(a), Box::new(b))
    }

    /// Variables read by the expression, in first-occurrence order.
    pub fn vars(&self) -> Vec<&str> {
        let mut out = Vec::new();
        self.collect_vars(&mut out);
        out
    }

    fn collect_vars<'a>(&'a self, out: &mut Vec<&'a str>) {
        match self {
            CExpr::Var(v) => {
                if !out.contains(&v.as_str()) {
                    out.push(v);
                }
            }
            CExpr::Const(_) | CExpr::Index(_) | CExpr::Bool(_) => {}
            CExpr::Tuple(items) => items.iter().for_each(|e| e.collect_vars(out)),
            CExpr::Proj(_, e) | CExpr::Neg(e) => e.collect_vars(out),
            CExpr::Bin(_, a, b) => {
                a.collect_vars(out);
                b.collect_vars(out);
            }
            CExpr::Ite(c, a, b) => {
                c.collect_vars(out);
                a.collect_vars(out);
                b.collect_vars(out);
            }
        }
    }
}

impl fmt::Display for CExpr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CExpr::Var(v) => write!(f, "{v}"),
            CExpr::Const(c) => write!(f, "{c}"),
            CExpr::Index(i) => write!(f, "{i}"),
            CExpr::Bool(b) => write!(f, "{}", if *b { "T" } else { "F" }),
            CExpr::Tuple(items) => {
                write!(f, "(")?;
                for (i, e) in items.iter().enumerate() {
                    if i > 0 {
                        write!(f, ", ")?;
                    }
                    write!(f, "{e}")?;
                }
                write!(f, ")")
            }
            CExpr::Proj(k, e) => write!(f, "proj_{} {e}", k + 1),
            CExpr::Neg(e) => write!(f, "-({e})"),
            CExpr::Bin(op, a, b) => write!(f, "({a} {} {b})", op.symbol()),
            CExpr::Ite(c, a, b) => write!(f, "(if {c} then {a} else {b})"),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum FlatRhs {
    Unif,
    Expr(CExpr),
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Binding {
    pub name: String,
    pub rhs: FlatRhs,
    pub ty: Ty,
    pub span: Span,
}

/// A probe-able output position.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct OutputSlot {
    pub name: String,
    pub ty: Ty,
    /// `true` for intermediate variables made observable by exposure.
    pub internal: bool,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FlatProgram {
    pub name: String,
    pub shares: ShareStructure,
    pub inputs: Vec<InputDecl>,
    pub body: Vec<Binding>,
    /// Return expression after unrolling, over concrete names.
    pub ret: CExpr,
    pub outputs: Vec<OutputSlot>,
    pub exposed: bool,
}

impl FlatProgram {
    pub fn input_names(&self) -> Vec<&str> {
        self.inputs.iter().map(|i| i.name.as_str()).collect()
    }

    pub fn is_input(&self, name: &str) -> bool {
        self.inputs.iter().any(|i| i.name == name)
    }

    pub fn binding(&self, name: &str) -> Option<&Binding> {
        self.body.iter().find(|b| b.name == name)
    }

    pub fn output_names(&self) -> Vec<&str> {
        self.outputs.iter().map(|o| o.name.as_str()).collect()
    }

    /// Output slots coming from intermediate variables.
    pub fn internal_outputs(&self) -> Vec<&str> {
        self.outputs
            .iter()
            .filter(|o| o.internal)
            .map(|o| o.name.as_str())
            .collect()
    }

    /// Names sampled uniformly, in binding order.
    pub fn uniform_names(&self) -> Vec<&str> {
        self.body
            .iter()
            .filter(|b| b.rhs == FlatRhs::Unif)
            .map(|b| b.name.as_str())
            .collect()
    }

    pub fn order(&self) -> usize {
        self.shares.order
    }
}

/// Inputs the value of `e` depends on syntactically, following bindings back
/// to the inputs.
pub fn free_inputs(e: &CExpr, program: &FlatProgram) -> BTreeSet<String> {
    let mut out = BTreeSet::new();
    let mut stack: Vec<String> = e.vars().into_iter().map(String::from).collect();
    let mut seen = BTreeSet::new();
    while let Some(v) = stack.pop() {
        if !seen.insert(v.clone()) {
            continue;
        }
        if program.is_input(&v) {
            out.insert(v);
        } else if let Some(b) = program.binding(&v) {
            if let FlatRhs::Expr(e) = &b.rhs {
                stack.extend(e.vars().into_iter().map(String::from));
            }
        }
    }
    out
}

/// Makes every intermediate variable observable. The result has the
/// intermediates first, in binding order, followed by the original outputs.
pub fn expose_internals(program: &FlatProgram) -> FlatProgram {
    if program.exposed {
        return program.clone();
    }
    let returned: BTreeSet<&str> = program
        .outputs
        .iter()
        .map(|o| o.name.as_str())
        .collect();
    let mut outputs: Vec<OutputSlot> = program
        .body
        .iter()
        .filter(|b| !returned.contains(b.name.as_str()))
        .map(|b| OutputSlot {
            name: b.name.clone(),
            ty: b.ty.clone(),
            internal: true,
        })
        .collect();
    outputs.extend(program.outputs.iter().cloned());
    FlatProgram {
        outputs,
        exposed: true,
        ..program.clone()
    }
}
