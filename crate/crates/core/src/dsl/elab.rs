//! Loop unrolling, name resolution and type checking.

use std::collections::{BTreeMap, HashMap};

use super::ast::*;
use super::flat::*;
use super::parser::{eval_cond, eval_iexpr, indexed_name};
use super::DslError;

/// A program whose unrolled form is well typed.
#[derive(Debug, Clone)]
pub struct TypedProgram {
    pub program: Program,
    pub var_types: BTreeMap<String, Ty>,
    pub output_type: Ty,
    pub(crate) flat: FlatProgram,
}

pub fn typecheck(program: &Program) -> Result<TypedProgram, DslError> {
    let flat = elaborate(program)?;
    let var_types = flat
        .inputs
        .iter()
        .map(|i| (i.name.clone(), base_ty(i.ty)))
        .chain(flat.body.iter().map(|b| (b.name.clone(), b.ty.clone())))
        .collect();
    let output_type = {
        let mut env = HashMap::new();
        for (n, t) in flat_env(&flat) {
            env.insert(n, t);
        }
        type_of(&flat.ret, &env).map_err(|m| DslError::Type {
            span: Span::default(),
            msg: m,
        })?
    };
    Ok(TypedProgram {
        program: program.clone(),
        var_types,
        output_type,
        flat,
    })
}

pub fn unroll(typed: &TypedProgram) -> FlatProgram {
    typed.flat.clone()
}

fn base_ty(t: BaseType) -> Ty {
    match t {
        BaseType::Ring => Ty::Ring,
        BaseType::Bool => Ty::Bool,
    }
}

fn flat_env(flat: &FlatProgram) -> Vec<(String, Ty)> {
    flat.inputs
        .iter()
        .map(|i| (i.name.clone(), base_ty(i.ty)))
        .chain(flat.body.iter().map(|b| (b.name.clone(), b.ty.clone())))
        .collect()
}

struct Elab<'p> {
    program: &'p Program,
    env: BTreeMap<String, i64>,
    /// Loop values of the enclosing loops, outermost first.
    versions: Vec<i64>,
    /// Surface name to the expression it currently denotes.
    scope: HashMap<String, CExpr>,
    types: HashMap<String, Ty>,
    body: Vec<Binding>,
}

fn elaborate(program: &Program) -> Result<FlatProgram, DslError> {
    let mut e = Elab {
        program,
        env: program.statics.iter().cloned().collect(),
        versions: Vec::new(),
        scope: HashMap::new(),
        types: HashMap::new(),
        body: Vec::new(),
    };
    for i in &program.inputs {
        e.types.insert(i.name.clone(), base_ty(i.ty));
        e.scope.insert(i.name.clone(), CExpr::Var(i.name.clone()));
    }
    e.stmts(&program.body)?;
    let ret = e.expr(&program.ret)?;
    let ret_span = expr_span(&program.ret);
    e.type_expr(&ret, ret_span)?;
    let mut outputs = Vec::new();
    let mut leaves = Vec::new();
    flatten_tuple(&ret, &mut leaves);
    for (k, leaf) in leaves.into_iter().enumerate() {
        let name = match leaf {
            CExpr::Var(v) if !outputs.iter().any(|o: &OutputSlot| &o.name == v) => v.clone(),
            other => {
                let name = format!("out[{k}]");
                e.bind(&name, FlatRhs::Expr(other.clone()), ret_span)?;
                name
            }
        };
        let ty = e.types[&name].clone();
        outputs.push(OutputSlot {
            name,
            ty,
            internal: false,
        });
    }
    Ok(FlatProgram {
        name: program.name.clone(),
        shares: program.shares.clone(),
        inputs: program.inputs.clone(),
        body: e.body,
        ret,
        outputs,
        exposed: false,
    })
}

fn flatten_tuple<'a>(e: &'a CExpr, out: &mut Vec<&'a CExpr>) {
    match e {
        CExpr::Tuple(items) => items.iter().for_each(|i| flatten_tuple(i, out)),
        other => out.push(other),
    }
}

fn expr_span(e: &Expr) -> Span {
    match e {
        Expr::Var(v) => v.span,
        Expr::Static(IExpr::Name(_, s)) => *s,
        Expr::Int(_, s) | Expr::Proj(_, _, s) | Expr::Neg(_, s) | Expr::Bin(.., s) | Expr::Ite(.., s) => *s,
        Expr::Tuple(items) => items.first().map(expr_span).unwrap_or_default(),
        Expr::Comprehension(b, _) => expr_span(b),
        Expr::Static(_) | Expr::Bool(_) => Span::default(),
    }
}

impl Elab<'_> {
    fn version_suffix(&self) -> String {
        self.versions.iter().map(|v| format!("#{v}")).collect()
    }

    fn bind(&mut self, name: &str, rhs: FlatRhs, span: Span) -> Result<(), DslError> {
        if self.types.contains_key(name) {
            return Err(DslError::Duplicate {
                name: name.to_string(),
                span,
            });
        }
        let ty = match &rhs {
            FlatRhs::Unif => Ty::Ring,
            FlatRhs::Expr(e) => self.type_expr(e, span)?,
        };
        let rhs = match rhs {
            FlatRhs::Expr(e) => FlatRhs::Expr(retype_literals(e, &self.types)),
            u => u,
        };
        self.types.insert(name.to_string(), ty.clone());
        self.body.push(Binding {
            name: name.to_string(),
            rhs,
            ty,
            span,
        });
        Ok(())
    }

    fn type_expr(&self, e: &CExpr, span: Span) -> Result<Ty, DslError> {
        type_of(e, &self.types).map_err(|msg| DslError::Type { span, msg })
    }

    fn surface_key(&self, r: &VarRef) -> Result<String, DslError> {
        let idx = r
            .indices
            .iter()
            .map(|i| eval_iexpr(i, &self.env))
            .collect::<Result<Vec<_>, _>>()?;
        Ok(indexed_name(&r.base, &idx))
    }

    fn stmts(&mut self, stmts: &[Stmt]) -> Result<(), DslError> {
        for s in stmts {
            self.stmt(s)?;
        }
        Ok(())
    }

    fn stmt(&mut self, s: &Stmt) -> Result<(), DslError> {
        match s {
            Stmt::Bind { target, rhs, span } => {
                let key = self.surface_key(target)?;
                if self.program.inputs.iter().any(|i| i.name == key) {
                    return Err(DslError::Duplicate { name: key, span: *span });
                }
                let concrete = if target.indices.is_empty() {
                    format!("{key}{}", self.version_suffix())
                } else {
                    key.clone()
                };
                match rhs {
                    Rhs::Unif => self.bind(&concrete, FlatRhs::Unif, *span)?,
                    Rhs::Ret(e) => {
                        let c = self.expr(e)?;
                        self.bind(&concrete, FlatRhs::Expr(c), *span)?;
                    }
                    Rhs::If(cond, then_b, else_b) => {
                        let c = self.expr(cond)?;
                        let t = self.block(then_b, &format!("{concrete}$then"))?;
                        let f = self.block(else_b, &format!("{concrete}$else"))?;
                        let ite = CExpr::Ite(Box::new(c), Box::new(t), Box::new(f));
                        self.bind(&concrete, FlatRhs::Expr(ite), *span)?;
                    }
                }
                self.scope.insert(key, CExpr::Var(concrete));
                Ok(())
            }
            Stmt::StaticIf {
                cond, then, els, ..
            } => {
                if eval_cond(cond, &self.env)? {
                    self.stmts(then)
                } else {
                    self.stmts(els)
                }
            }
            Stmt::For(l) => self.for_loop(l),
        }
    }

    fn block(&mut self, b: &Block, name: &str) -> Result<CExpr, DslError> {
        self.stmts(&b.stmts)?;
        let r = self.expr(&b.ret)?;
        self.bind(name, FlatRhs::Expr(r), expr_span(&b.ret))?;
        Ok(CExpr::Var(name.to_string()))
    }

    fn for_loop(&mut self, l: &ForLoop) -> Result<(), DslError> {
        let start = eval_iexpr(&l.start, &self.env)?;
        let end = eval_iexpr(&l.end, &self.env)?;
        let acc_base = l
            .acc
            .as_ref()
            .map(|(name, _)| format!("{name}{}", self.version_suffix()));
        if let (Some((name, init)), Some(base)) = (&l.acc, &acc_base) {
            let init = self.expr(init)?;
            let v = self.alias_or_bind(&format!("{base}@0"), init, l.span)?;
            self.scope.insert(name.clone(), v);
        }
        let saved = self.env.get(&l.var).copied();
        for (k, i) in (start..=end).enumerate() {
            self.env.insert(l.var.clone(), i);
            self.versions.push(i);
            let r = self.stmts(&l.body);
            self.versions.pop();
            r?;
            if let (Some((name, _)), Some(ret), Some(base)) = (&l.acc, &l.ret, &acc_base) {
                self.versions.push(i);
                let v = self.expr(ret);
                self.versions.pop();
                let v = self.alias_or_bind(&format!("{base}@{}", k + 1), v?, l.span)?;
                self.scope.insert(name.clone(), v);
            }
        }
        match saved {
            Some(v) => self.env.insert(l.var.clone(), v),
            None => self.env.remove(&l.var),
        };
        Ok(())
    }

    /// Accumulator values that are plain variables (or tuples of them) are
    /// tracked by reference; anything else gets its own binding.
    fn alias_or_bind(&mut self, name: &str, e: CExpr, span: Span) -> Result<CExpr, DslError> {
        if is_var_tuple(&e) {
            self.type_expr(&e, span)?;
            Ok(e)
        } else {
            self.bind(name, FlatRhs::Expr(e), span)?;
            Ok(CExpr::Var(name.to_string()))
        }
    }

    fn expr(&mut self, e: &Expr) -> Result<CExpr, DslError> {
        Ok(match e {
            Expr::Var(r) => {
                let key = self.surface_key(r)?;
                match self.scope.get(&key) {
                    Some(c) => c.clone(),
                    None => {
                        return Err(DslError::Unbound {
                            name: key,
                            span: r.span,
                        })
                    }
                }
            }
            Expr::Static(i) => CExpr::Index(eval_iexpr(i, &self.env)?),
            Expr::Int(n, _) => CExpr::Const(*n),
            Expr::Bool(b) => CExpr::Bool(*b),
            Expr::Tuple(items) => CExpr::Tuple(
                items
                    .iter()
                    .map(|i| self.expr(i))
                    .collect::<Result<_, _>>()?,
            ),
            Expr::Comprehension(body, gens) => {
                let mut out = Vec::new();
                self.comprehension(body, gens, &mut out)?;
                CExpr::Tuple(out)
            }
            Expr::Proj(k, inner, span) => {
                let c = self.expr(inner)?;
                match c {
                    CExpr::Tuple(items) => match items.get(k - 1) {
                        Some(item) => item.clone(),
                        None => {
                            return Err(DslError::Type {
                                span: *span,
                                msg: format!(
                                    "projection proj_{k} of a {}-tuple",
                                    items.len()
                                ),
                            })
                        }
                    },
                    other => CExpr::Proj(k - 1, Box::new(other)),
                }
            }
            Expr::Neg(a, _) => CExpr::Neg(Box::new(self.expr(a)?)),
            Expr::Bin(op, a, b, _) => CExpr::bin(*op, self.expr(a)?, self.expr(b)?),
            Expr::Ite(c, a, b, _) => CExpr::Ite(
                Box::new(self.expr(c)?),
                Box::new(self.expr(a)?),
                Box::new(self.expr(b)?),
            ),
        })
    }

    fn comprehension(
        &mut self,
        body: &Expr,
        gens: &[Generator],
        out: &mut Vec<CExpr>,
    ) -> Result<(), DslError> {
        let Some((g, rest)) = gens.split_first() else {
            out.push(self.expr(body)?);
            return Ok(());
        };
        let start = eval_iexpr(&g.start, &self.env)?;
        let end = eval_iexpr(&g.end, &self.env)?;
        let saved = self.env.get(&g.var).copied();
        let mut result = Ok(());
        for i in start..=end {
            self.env.insert(g.var.clone(), i);
            result = self.comprehension(body, rest, out);
            if result.is_err() {
                break;
            }
        }
        match saved {
            Some(v) => self.env.insert(g.var.clone(), v),
            None => self.env.remove(&g.var),
        };
        result
    }
}

fn is_var_tuple(e: &CExpr) -> bool {
    match e {
        CExpr::Var(_) => true,
        CExpr::Tuple(items) => items.iter().all(is_var_tuple),
        _ => false,
    }
}

fn is_literal(e: &CExpr) -> bool {
    match e {
        CExpr::Const(_) => true,
        CExpr::Neg(a) => is_literal(a),
        CExpr::Bin(BinOp::Add | BinOp::Sub | BinOp::Mul, a, b) => {
            is_literal(a) && is_literal(b)
        }
        _ => false,
    }
}

/// Turns ring literals that meet an index operand into index constants.
fn retype_literals(e: CExpr, types: &HashMap<String, Ty>) -> CExpr {
    match e {
        CExpr::Bin(op, a, b) => {
            let a = retype_literals(*a, types);
            let b = retype_literals(*b, types);
            let ta = type_of(&a, types).ok();
            let tb = type_of(&b, types).ok();
            let (a, b) = match (ta, tb) {
                (Some(Ty::Index), _) if is_literal(&b) => (a, to_index(b)),
                (_, Some(Ty::Index)) if is_literal(&a) => (to_index(a), b),
                _ => (a, b),
            };
            CExpr::bin(op, a, b)
        }
        CExpr::Tuple(items) => CExpr::Tuple(
            items
                .into_iter()
                .map(|i| retype_literals(i, types))
                .collect(),
        ),
        CExpr::Proj(k, a) => CExpr::Proj(k, Box::new(retype_literals(*a, types))),
        CExpr::Neg(a) => CExpr::Neg(Box::new(retype_literals(*a, types))),
        CExpr::Ite(c, a, b) => CExpr::Ite(
            Box::new(retype_literals(*c, types)),
            Box::new(retype_literals(*a, types)),
            Box::new(retype_literals(*b, types)),
        ),
        other => other,
    }
}

fn to_index(e: CExpr) -> CExpr {
    match e {
        CExpr::Const(c) => CExpr::Index(c as i64),
        CExpr::Neg(a) => CExpr::Neg(Box::new(to_index(*a))),
        CExpr::Bin(op, a, b) => CExpr::bin(op, to_index(*a), to_index(*b)),
        other => other,
    }
}

/// Type of `e`; ring literals adapt to an index operand.
pub(crate) fn type_of(e: &CExpr, types: &HashMap<String, Ty>) -> Result<Ty, String> {
    Ok(match e {
        CExpr::Var(v) => types
            .get(v)
            .cloned()
            .ok_or_else(|| format!("unbound variable `{v}`"))?,
        CExpr::Const(_) => Ty::Ring,
        CExpr::Index(_) => Ty::Index,
        CExpr::Bool(_) => Ty::Bool,
        CExpr::Tuple(items) => Ty::Tuple(
            items
                .iter()
                .map(|i| type_of(i, types))
                .collect::<Result<_, _>>()?,
        ),
        CExpr::Proj(k, a) => match type_of(a, types)? {
            Ty::Tuple(ts) if *k < ts.len() => ts[*k].clone(),
            t => return Err(format!("cannot take proj_{} of a value of type {t}", k + 1)),
        },
        CExpr::Neg(a) => match type_of(a, types)? {
            t @ (Ty::Ring | Ty::Index) => t,
            t => return Err(format!("cannot negate a value of type {t}")),
        },
        CExpr::Bin(op, a, b) => {
            let mut ta = type_of(a, types)?;
            let mut tb = type_of(b, types)?;
            if ta == Ty::Index && is_literal(b) {
                tb = Ty::Index;
            }
            if tb == Ty::Index && is_literal(a) {
                ta = Ty::Index;
            }
            match op {
                BinOp::Add | BinOp::Sub | BinOp::Mul => match (&ta, &tb) {
                    (Ty::Ring, Ty::Ring) => Ty::Ring,
                    (Ty::Index, Ty::Index) => Ty::Index,
                    _ => {
                        return Err(format!(
                            "operator `{}` needs two ring or two index operands, found {ta} and {tb}",
                            op.symbol()
                        ))
                    }
                },
                BinOp::And | BinOp::Or => match (&ta, &tb) {
                    (Ty::Bool, Ty::Bool) => Ty::Bool,
                    _ => {
                        return Err(format!(
                            "operator `{}` needs boolean operands, found {ta} and {tb}",
                            op.symbol()
                        ))
                    }
                },
                BinOp::Eq | BinOp::Ne => {
                    if ta != tb || matches!(ta, Ty::Tuple(_)) {
                        return Err(format!(
                            "operator `{}` compares values of one base type, found {ta} and {tb}",
                            op.symbol()
                        ));
                    }
                    Ty::Bool
                }
            }
        }
        CExpr::Ite(c, a, b) => {
            let tc = type_of(c, types)?;
            if tc != Ty::Bool {
                return Err(format!("condition has type {tc}, expected bool"));
            }
            let ta = type_of(a, types)?;
            let tb = type_of(b, types)?;
            if ta != tb {
                return Err(format!("branches have different types {ta} and {tb}"));
            }
            ta
        }
    })
}
