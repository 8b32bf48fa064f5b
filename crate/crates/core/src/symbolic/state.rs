//! Symbolic execution of unrolled programs into normal forms.

use std::collections::HashMap;
use std::fmt::Write;

use super::form::*;
use super::SymbolicError;
use crate::dsl::ast::BinOp;
use crate::dsl::{CExpr, FlatProgram, FlatRhs};
use crate::semantics::{Modulus, Value};

/// Normal form of every input and bound variable.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SymbolicState {
    pub q: Modulus,
    pub input_names: Vec<String>,
    pub uniform_names: Vec<String>,
    /// Variables in binding order (inputs first).
    pub order: Vec<String>,
    pub values: HashMap<String, SymValue>,
}

impl SymbolicState {
    pub fn get(&self, name: &str) -> Option<&SymValue> {
        self.values.get(name)
    }

    pub fn atom_name(&self, a: Atom) -> String {
        match a {
            Atom::Input(i) => self.input_names[i].clone(),
            Atom::Uniform(k) => self.uniform_names[k].clone(),
            Atom::Fresh(k) => format!("$u{k}"),
        }
    }

    pub fn render(&self, v: &SymValue) -> String {
        render_value(v, &|a| self.atom_name(a), self.q)
    }
}

pub fn to_symbolic(p: &FlatProgram, q: Modulus) -> Result<SymbolicState, SymbolicError> {
    let mut values = HashMap::new();
    let mut order = Vec::new();
    for (i, input) in p.inputs.iter().enumerate() {
        let v = match input.ty {
            crate::dsl::BaseType::Ring => SymValue::Ring(LinearForm::atom(Atom::Input(i))),
            crate::dsl::BaseType::Bool => SymValue::Bool(BoolTerm::Atom(Atom::Input(i))),
        };
        values.insert(input.name.clone(), v);
        order.push(input.name.clone());
    }
    let mut uniform_names = Vec::new();
    for b in &p.body {
        let v = match &b.rhs {
            FlatRhs::Unif => {
                uniform_names.push(b.name.clone());
                SymValue::Ring(LinearForm::atom(Atom::Uniform(uniform_names.len() - 1)))
            }
            FlatRhs::Expr(e) => sym_expr(e, &values, q).map_err(|msg| SymbolicError::Unsupported {
                var: b.name.clone(),
                msg,
            })?,
        };
        values.insert(b.name.clone(), v);
        order.push(b.name.clone());
    }
    Ok(SymbolicState {
        q,
        input_names: p.inputs.iter().map(|i| i.name.clone()).collect(),
        uniform_names,
        order,
        values,
    })
}

fn ring(v: SymValue) -> Result<LinearForm, String> {
    match v {
        SymValue::Ring(f) => Ok(f),
        other => Err(format!("expected a ring value, found {other:?}")),
    }
}

fn boolean(v: SymValue) -> Result<BoolTerm, String> {
    match v {
        SymValue::Bool(b) => Ok(b),
        other => Err(format!("expected a boolean, found {other:?}")),
    }
}

fn not(b: BoolTerm) -> BoolTerm {
    match b {
        BoolTerm::Const(c) => BoolTerm::Const(!c),
        BoolTerm::Opaque(o) => match &*o {
            Opaque::Not(inner) => inner.clone(),
            _ => BoolTerm::opaque(Opaque::Not(BoolTerm::Opaque(o))),
        },
        other => BoolTerm::opaque(Opaque::Not(other)),
    }
}

fn eq_values(a: SymValue, b: SymValue, q: Modulus) -> Result<BoolTerm, String> {
    Ok(match (a, b) {
        (SymValue::Ring(x), SymValue::Ring(y)) => {
            let d = x.sub(&y, q);
            if d.is_constant() {
                BoolTerm::Const(d.constant == 0)
            } else {
                BoolTerm::opaque(Opaque::EqZero(d))
            }
        }
        (SymValue::Bool(x), SymValue::Bool(y)) => match (&x, &y) {
            (BoolTerm::Const(p), BoolTerm::Const(r)) => BoolTerm::Const(p == r),
            _ if x == y => BoolTerm::Const(true),
            _ => {
                let (x, y) = if x <= y { (x, y) } else { (y, x) };
                BoolTerm::opaque(Opaque::EqBool(x, y))
            }
        },
        (SymValue::Index(x), SymValue::Index(y)) => BoolTerm::Const(x == y),
        (a, b) => return Err(format!("cannot compare {a:?} and {b:?}")),
    })
}

fn ite(c: BoolTerm, a: SymValue, b: SymValue) -> Result<SymValue, String> {
    if let BoolTerm::Const(k) = c {
        return Ok(if k { a } else { b });
    }
    if a == b {
        return Ok(a);
    }
    Ok(match (a, b) {
        (SymValue::Ring(x), SymValue::Ring(y)) => {
            SymValue::Ring(LinearForm::monomial(Monomial::Opaque(std::sync::Arc::new(Opaque::Ite(c, x, y)))))
        }
        (SymValue::Bool(x), SymValue::Bool(y)) => SymValue::Bool(BoolTerm::opaque(Opaque::IteBool(c, x, y))),
        (SymValue::Tuple(xs), SymValue::Tuple(ys)) if xs.len() == ys.len() => SymValue::Tuple(
            xs.into_iter()
                .zip(ys)
                .map(|(x, y)| ite(c.clone(), x, y))
                .collect::<Result<_, _>>()?,
        ),
        (a, b) => return Err(format!("conditional over {a:?} and {b:?} has no normal form")),
    })
}

pub(crate) fn sym_expr(e: &CExpr, env: &HashMap<String, SymValue>, q: Modulus) -> Result<SymValue, String> {
    Ok(match e {
        CExpr::Var(v) => env.get(v).cloned().ok_or_else(|| format!("unbound `{v}`"))?,
        CExpr::Const(c) => SymValue::Ring(LinearForm::constant(q.reduce(*c))),
        CExpr::Index(i) => SymValue::Index(*i),
        CExpr::Bool(b) => SymValue::Bool(BoolTerm::Const(*b)),
        CExpr::Tuple(items) => SymValue::Tuple(
            items
                .iter()
                .map(|i| sym_expr(i, env, q))
                .collect::<Result<_, _>>()?,
        ),
        CExpr::Proj(k, a) => match sym_expr(a, env, q)? {
            SymValue::Tuple(mut items) if *k < items.len() => items.swap_remove(*k),
            other => return Err(format!("projection of {other:?}")),
        },
        CExpr::Neg(a) => match sym_expr(a, env, q)? {
            SymValue::Ring(f) => SymValue::Ring(f.neg(q)),
            SymValue::Index(i) => SymValue::Index(-i),
            other => return Err(format!("negation of {other:?}")),
        },
        CExpr::Bin(op, a, b) => {
            let x = sym_expr(a, env, q)?;
            let y = sym_expr(b, env, q)?;
            match op {
                BinOp::Add | BinOp::Sub | BinOp::Mul => match (x, y) {
                    (SymValue::Index(i), SymValue::Index(j)) => SymValue::Index(match op {
                        BinOp::Add => i + j,
                        BinOp::Sub => i - j,
                        _ => i * j,
                    }),
                    (x, y) => {
                        let (x, y) = (ring(x)?, ring(y)?);
                        SymValue::Ring(match op {
                            BinOp::Add => x.add(&y, q),
                            BinOp::Sub => x.sub(&y, q),
                            _ => x.mul(&y, q),
                        })
                    }
                },
                BinOp::And | BinOp::Or => {
                    let (x, y) = (boolean(x)?, boolean(y)?);
                    let is_and = *op == BinOp::And;
                    SymValue::Bool(match (&x, &y) {
                        (BoolTerm::Const(c), _) => {
                            if *c == is_and {
                                y
                            } else {
                                BoolTerm::Const(*c)
                            }
                        }
                        (_, BoolTerm::Const(c)) => {
                            if *c == is_and {
                                x
                            } else {
                                BoolTerm::Const(*c)
                            }
                        }
                        _ => {
                            let (x, y) = if x <= y { (x, y) } else { (y, x) };
                            BoolTerm::opaque(if is_and { Opaque::And(x, y) } else { Opaque::Or(x, y) })
                        }
                    })
                }
                BinOp::Eq => SymValue::Bool(eq_values(x, y, q)?),
                BinOp::Ne => SymValue::Bool(not(eq_values(x, y, q)?)),
            }
        }
        CExpr::Ite(c, a, b) => {
            let c = boolean(sym_expr(c, env, q)?)?;
            ite(c, sym_expr(a, env, q)?, sym_expr(b, env, q)?)?
        }
    })
}

// ---- rendering ----------------------------------------------------------

pub(crate) fn render_value(v: &SymValue, name: &dyn Fn(Atom) -> String, q: Modulus) -> String {
    match v {
        SymValue::Ring(f) => render_form(f, name, q),
        SymValue::Bool(b) => render_bool(b, name, q),
        SymValue::Index(i) => i.to_string(),
        SymValue::Tuple(items) => {
            let parts: Vec<String> = items.iter().map(|i| render_value(i, name, q)).collect();
            format!("({})", parts.join(", "))
        }
    }
}

pub(crate) fn render_form(f: &LinearForm, name: &dyn Fn(Atom) -> String, q: Modulus) -> String {
    let mut s = String::new();
    for (m, &c) in &f.terms {
        let body = match m {
            Monomial::Atom(a) => name(*a),
            Monomial::Opaque(o) => render_opaque(o, name, q),
        };
        let neg = c == q.get() - 1 && q.get() > 2;
        if s.is_empty() {
            if neg {
                s.push('-');
            }
        } else {
            s.push_str(if neg { " - " } else { " + " });
        }
        if c != 1 && !neg {
            let _ = write!(s, "{c}*");
        }
        s.push_str(&body);
    }
    if f.constant != 0 || s.is_empty() {
        if s.is_empty() {
            let _ = write!(s, "{}", f.constant);
        } else {
            let _ = write!(s, " + {}", f.constant);
        }
    }
    s
}

fn render_bool(b: &BoolTerm, name: &dyn Fn(Atom) -> String, q: Modulus) -> String {
    match b {
        BoolTerm::Const(c) => (if *c { "T" } else { "F" }).to_string(),
        BoolTerm::Atom(a) => name(*a),
        BoolTerm::Opaque(o) => render_opaque(o, name, q),
    }
}

fn render_opaque(o: &Opaque, name: &dyn Fn(Atom) -> String, q: Modulus) -> String {
    let f = |x: &LinearForm| render_form(x, name, q);
    let b = |x: &BoolTerm| render_bool(x, name, q);
    match o {
        Opaque::Mul(x, y) => format!("({})*({})", f(x), f(y)),
        Opaque::Ite(c, x, y) => format!("(if {} then {} else {})", b(c), f(x), f(y)),
        Opaque::EqZero(x) => format!("({} == 0)", f(x)),
        Opaque::EqBool(x, y) => format!("({} == {})", b(x), b(y)),
        Opaque::And(x, y) => format!("({} && {})", b(x), b(y)),
        Opaque::Or(x, y) => format!("({} || {})", b(x), b(y)),
        Opaque::Not(x) => format!("!{}", b(x)),
        Opaque::IteBool(c, x, y) => format!("(if {} then {} else {})", b(c), b(x), b(y)),
    }
}

// ---- evaluation -----------------------------------------------------------

/// Evaluates a normal form with atoms valued by `env`.
pub fn eval_sym(v: &SymValue, env: &dyn Fn(Atom) -> Value, q: Modulus) -> Value {
    match v {
        SymValue::Ring(f) => Value::Ring(eval_form(f, env, q)),
        SymValue::Bool(b) => Value::Bool(eval_bool(b, env, q)),
        SymValue::Index(i) => Value::Index(*i),
        SymValue::Tuple(items) => Value::Tuple(items.iter().map(|i| eval_sym(i, env, q)).collect()),
    }
}

fn eval_form(f: &LinearForm, env: &dyn Fn(Atom) -> Value, q: Modulus) -> u32 {
    let mut acc = f.constant;
    for (m, &c) in &f.terms {
        let v = match m {
            Monomial::Atom(a) => env(*a).as_ring().expect("ring atom"),
            Monomial::Opaque(o) => eval_opaque_ring(o, env, q),
        };
        acc = q.add(acc, q.mul(c, v));
    }
    acc
}

fn eval_opaque_ring(o: &Opaque, env: &dyn Fn(Atom) -> Value, q: Modulus) -> u32 {
    match o {
        Opaque::Mul(x, y) => q.mul(eval_form(x, env, q), eval_form(y, env, q)),
        Opaque::Ite(c, x, y) => {
            if eval_bool(c, env, q) {
                eval_form(x, env, q)
            } else {
                eval_form(y, env, q)
            }
        }
        _ => unreachable!("boolean opaque term in ring position"),
    }
}

fn eval_bool(b: &BoolTerm, env: &dyn Fn(Atom) -> Value, q: Modulus) -> bool {
    match b {
        BoolTerm::Const(c) => *c,
        BoolTerm::Atom(a) => env(*a).as_bool().expect("boolean atom"),
        BoolTerm::Opaque(o) => match &**o {
            Opaque::EqZero(x) => eval_form(x, env, q) == 0,
            Opaque::EqBool(x, y) => eval_bool(x, env, q) == eval_bool(y, env, q),
            Opaque::And(x, y) => eval_bool(x, env, q) && eval_bool(y, env, q),
            Opaque::Or(x, y) => eval_bool(x, env, q) || eval_bool(y, env, q),
            Opaque::Not(x) => !eval_bool(x, env, q),
            Opaque::IteBool(c, x, y) => {
                if eval_bool(c, env, q) {
                    eval_bool(x, env, q)
                } else {
                    eval_bool(y, env, q)
                }
            }
            _ => unreachable!("ring opaque term in boolean position"),
        },
    }
}
