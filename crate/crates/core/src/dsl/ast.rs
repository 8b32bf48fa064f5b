//! Surface syntax of gadget descriptions, before loop unrolling.

use std::fmt;

use serde::Serialize;

/// 1-based source position.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Default, Serialize)]
pub struct Span {
    pub line: u32,
    pub col: u32,
}

impl fmt::Display for Span {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}:{}", self.line, self.col)
    }
}

/// Static integer expression: loop indices, parameters and the masking order.
/// Only affine forms are accepted (products need a constant side).
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum IExpr {
    Int(i64),
    Name(String, Span),
    Neg(Box<IExpr>),
    Bin(IOp, Box<IExpr>, Box<IExpr>),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum IOp {
    Add,
    Sub,
    Mul,
}

/// Compile-time condition over static integers.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Cond {
    Cmp(CmpOp, IExpr, IExpr),
    And(Box<Cond>, Box<Cond>),
    Or(Box<Cond>, Box<Cond>),
    Not(Box<Cond>),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CmpOp {
    Eq,
    Ne,
    Lt,
    Le,
    Gt,
    Ge,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct VarRef {
    pub base: String,
    pub indices: Vec<IExpr>,
    pub span: Span,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize)]
pub enum BinOp {
    Add,
    Sub,
    Mul,
    And,
    Or,
    Eq,
    Ne,
}

impl BinOp {
    pub fn symbol(self) -> &'static str {
        match self {
            BinOp::Add => "+",
            BinOp::Sub => "-",
            BinOp::Mul => "*",
            BinOp::And => "&&",
            BinOp::Or => "||",
            BinOp::Eq => "==",
            BinOp::Ne => "!=",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Generator {
    pub var: String,
    pub start: IExpr,
    pub end: IExpr,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Expr {
    Var(VarRef),
    /// A loop index or parameter used as a value of type `index`.
    Static(IExpr),
    Int(u64, Span),
    Bool(bool),
    Tuple(Vec<Expr>),
    /// `(body for i in a..b for j in c..d)`, expanded into a tuple.
    Comprehension(Box<Expr>, Vec<Generator>),
    /// 1-based projection, `proj_k e`.
    Proj(usize, Box<Expr>, Span),
    Neg(Box<Expr>, Span),
    Bin(BinOp, Box<Expr>, Box<Expr>, Span),
    Ite(Box<Expr>, Box<Expr>, Box<Expr>, Span),
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Block {
    pub stmts: Vec<Stmt>,
    pub ret: Expr,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Rhs {
    Unif,
    Ret(Expr),
    /// Program-level conditional; both branches run and the result is selected.
    If(Expr, Block, Block),
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ForLoop {
    pub var: String,
    pub start: IExpr,
    pub end: IExpr,
    pub acc: Option<(String, Expr)>,
    pub body: Vec<Stmt>,
    pub ret: Option<Expr>,
    pub span: Span,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Stmt {
    Bind { target: VarRef, rhs: Rhs, span: Span },
    For(ForLoop),
    StaticIf { cond: Cond, then: Vec<Stmt>, els: Vec<Stmt>, span: Span },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize)]
pub enum BaseType {
    Ring,
    Bool,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Dim {
    Size(IExpr),
    Range(IExpr, IExpr),
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Header {
    Gadget(String),
    Order(String, i64),
    Param(String, i64),
    Shares(String, Vec<Dim>, Span),
    Unshared(String, Vec<Dim>, BaseType, Span),
}

/// Share families and unshared inputs of a gadget.
#[derive(Debug, Clone, PartialEq, Eq, Default, Serialize)]
pub struct ShareStructure {
    pub order: usize,
    pub families: Vec<ShareFamily>,
    pub unshared: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct ShareFamily {
    pub name: String,
    pub members: Vec<String>,
}

impl ShareStructure {
    /// Family containing `input`, if it is a share.
    pub fn family_of(&self, input: &str) -> Option<usize> {
        self.families
            .iter()
            .position(|f| f.members.iter().any(|m| m == input))
    }

    pub fn is_unshared(&self, input: &str) -> bool {
        self.unshared.iter().any(|u| u == input)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct InputDecl {
    pub name: String,
    pub ty: BaseType,
}

/// A parsed gadget. Loops are still present; names inside them are resolved
/// when the program is unrolled.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Program {
    pub name: String,
    pub headers: Vec<Header>,
    /// Static integer environment: the masking order and every `param`.
    pub statics: Vec<(String, i64)>,
    pub shares: ShareStructure,
    pub inputs: Vec<InputDecl>,
    pub body: Vec<Stmt>,
    pub ret: Expr,
}

impl Program {
    pub fn static_value(&self, name: &str) -> Option<i64> {
        self.statics
            .iter()
            .find(|(n, _)| n == name)
            .map(|(_, v)| *v)
    }
}
