//! Canonical formatting of gadget sources.

use std::fmt::Write;

use super::ast::*;

pub fn pretty(p: &Program) -> String {
    let mut out = String::new();
    for h in &p.headers {
        match h {
            Header::Gadget(n) => writeln!(out, "gadget {n}"),
            Header::Order(n, v) => writeln!(out, "order {n} = {v}"),
            Header::Param(n, v) => writeln!(out, "param {n} = {v}"),
            Header::Shares(n, dims, _) => writeln!(out, "shares {n}{}", dims_str(dims)),
            Header::Unshared(n, dims, ty, _) => {
                let suffix = if *ty == BaseType::Bool { " : bool" } else { "" };
                writeln!(out, "unshared {n}{}{suffix}", dims_str(dims))
            }
        }
        .expect("writing to a string");
    }
    if !p.headers.is_empty() {
        out.push('\n');
    }
    stmts(&mut out, &p.body, 0);
    let _ = writeln!(out, "return {}", expr(&p.ret, 0));
    out
}

fn indent(out: &mut String, depth: usize) {
    for _ in 0..depth {
        out.push_str("    ");
    }
}

fn dims_str(dims: &[Dim]) -> String {
    dims.iter()
        .map(|d| match d {
            Dim::Size(e) => format!("[{}]", iexpr(e, 0)),
            Dim::Range(a, b) => format!("[{}..{}]", iexpr(a, 0), iexpr(b, 0)),
        })
        .collect()
}

fn stmts(out: &mut String, stmts_: &[Stmt], depth: usize) {
    for s in stmts_ {
        stmt(out, s, depth);
    }
}

fn stmt(out: &mut String, s: &Stmt, depth: usize) {
    indent(out, depth);
    match s {
        Stmt::Bind { target, rhs, .. } => {
            let _ = write!(out, "{} <- ", var_ref(target));
            match rhs {
                Rhs::Unif => out.push_str("unif\n"),
                Rhs::Ret(e) => {
                    let _ = writeln!(out, "{}", expr(e, 0));
                }
                Rhs::If(c, a, b) => {
                    let _ = writeln!(out, "if {} then {{", expr(c, 0));
                    block(out, a, depth + 1);
                    indent(out, depth);
                    out.push_str("} else {\n");
                    block(out, b, depth + 1);
                    indent(out, depth);
                    out.push_str("}\n");
                }
            }
        }
        Stmt::For(l) => {
            let _ = write!(out, "for {} in {}..{}", l.var, iexpr(&l.start, 0), iexpr(&l.end, 0));
            if let Some((name, init)) = &l.acc {
                let _ = write!(out, " acc {name} init {}", expr(init, 0));
            }
            out.push_str(" {\n");
            stmts(out, &l.body, depth + 1);
            if let Some(r) = &l.ret {
                indent(out, depth + 1);
                let _ = writeln!(out, "return {}", expr(r, 0));
            }
            indent(out, depth);
            out.push_str("}\n");
        }
        Stmt::StaticIf {
            cond, then, els, ..
        } => {
            let _ = writeln!(out, "if {} {{", cond_str(cond, 0));
            stmts(out, then, depth + 1);
            indent(out, depth);
            if els.is_empty() {
                out.push_str("}\n");
            } else {
                out.push_str("} else {\n");
                stmts(out, els, depth + 1);
                indent(out, depth);
                out.push_str("}\n");
            }
        }
    }
}

fn block(out: &mut String, b: &Block, depth: usize) {
    stmts(out, &b.stmts, depth);
    indent(out, depth);
    let _ = writeln!(out, "return {}", expr(&b.ret, 0));
}

fn var_ref(r: &VarRef) -> String {
    let mut s = r.base.clone();
    for i in &r.indices {
        let _ = write!(s, "[{}]", iexpr(i, 0));
    }
    s
}

fn paren(s: String, needed: bool) -> String {
    if needed {
        format!("({s})")
    } else {
        s
    }
}

fn iexpr(e: &IExpr, min: u8) -> String {
    match e {
        IExpr::Int(n) if *n < 0 => paren(format!("-{}", n.unsigned_abs()), min > 0),
        IExpr::Int(n) => n.to_string(),
        IExpr::Name(n, _) => n.clone(),
        IExpr::Neg(a) => format!("-{}", iexpr(a, 3)),
        IExpr::Bin(op, a, b) => {
            let (p, sym) = match op {
                IOp::Add => (1, "+"),
                IOp::Sub => (1, "-"),
                IOp::Mul => (2, "*"),
            };
            paren(
                format!("{} {sym} {}", iexpr(a, p), iexpr(b, p + 1)),
                p < min,
            )
        }
    }
}

fn cond_str(c: &Cond, min: u8) -> String {
    match c {
        Cond::Cmp(op, a, b) => {
            let sym = match op {
                CmpOp::Eq => "==",
                CmpOp::Ne => "!=",
                CmpOp::Lt => "<",
                CmpOp::Le => "<=",
                CmpOp::Gt => ">",
                CmpOp::Ge => ">=",
            };
            format!("{} {sym} {}", iexpr(a, 0), iexpr(b, 0))
        }
        Cond::Or(a, b) => paren(format!("{} || {}", cond_str(a, 1), cond_str(b, 2)), min > 1),
        Cond::And(a, b) => paren(format!("{} && {}", cond_str(a, 2), cond_str(b, 3)), min > 2),
        Cond::Not(a) => format!("!{}", cond_str(a, 3)),
    }
}

fn prec(op: BinOp) -> u8 {
    match op {
        BinOp::Or => 1,
        BinOp::And => 2,
        BinOp::Eq | BinOp::Ne => 3,
        BinOp::Add | BinOp::Sub => 4,
        BinOp::Mul => 5,
    }
}

/// Renders `e`, adding parentheses when its precedence is below `min`.
pub(crate) fn expr(e: &Expr, min: u8) -> String {
    match e {
        Expr::Var(r) => var_ref(r),
        Expr::Static(i) => iexpr(i, 3),
        Expr::Int(n, _) => n.to_string(),
        Expr::Bool(b) => (if *b { "T" } else { "F" }).to_string(),
        Expr::Tuple(items) => {
            let inner: Vec<String> = items.iter().map(|i| expr(i, 0)).collect();
            if items.len() == 1 {
                format!("({},)", inner[0])
            } else {
                format!("({})", inner.join(", "))
            }
        }
        Expr::Comprehension(body, gens) => {
            let mut s = format!("({}", expr(body, 0));
            for g in gens {
                let _ = write!(s, " for {} in {}..{}", g.var, iexpr(&g.start, 0), iexpr(&g.end, 0));
            }
            s.push(')');
            s
        }
        Expr::Proj(k, a, _) => paren(format!("proj_{k} {}", expr(a, 6)), min > 6),
        Expr::Neg(a, _) => paren(format!("-{}", expr(a, 6)), min > 6),
        Expr::Bin(op, a, b, _) => {
            let p = prec(*op);
            let lhs_min = if p == 3 { p + 1 } else { p };
            paren(
                format!("{} {} {}", expr(a, lhs_min), op.symbol(), expr(b, p + 1)),
                p < min,
            )
        }
        Expr::Ite(c, a, b, _) => paren(
            format!("if {} then {} else {}", expr(c, 0), expr(a, 0), expr(b, 0)),
            min > 0,
        ),
    }
}
