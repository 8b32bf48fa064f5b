//! Recursive-descent parser for `.gdl` gadget files.

use std::collections::BTreeMap;

use super::ast::*;
use super::lexer::{tokenize, Tok, Token};
use super::DslError;

pub(crate) const KEYWORDS: &[&str] = &[
    "gadget", "order", "param", "shares", "unshared", "for", "in", "acc", "init", "return", "ret",
    "unif", "if", "then", "else", "T", "F", "true", "false", "bool", "ring",
];

/// Overrides for `order` and `param` values, keyed by name.
/// Override key that replaces the masking order whatever its name.
pub const ORDER_OVERRIDE: &str = "order";

pub type Overrides = BTreeMap<String, i64>;

pub(super) fn parse_program(src: &str, overrides: &Overrides) -> Result<Program, DslError> {
    let tokens = tokenize(src)?;
    let mut p = Parser {
        toks: tokens,
        pos: 0,
        statics: Vec::new(),
        loop_vars: Vec::new(),
        overrides,
    };
    p.program()
}

struct Parser<'a> {
    toks: Vec<Token>,
    pos: usize,
    statics: Vec<(String, i64)>,
    loop_vars: Vec<String>,
    overrides: &'a Overrides,
}

impl Parser<'_> {
    fn peek(&self) -> &Tok {
        &self.toks[self.pos].tok
    }

    fn span(&self) -> Span {
        self.toks[self.pos].span
    }

    fn advance(&mut self) -> Token {
        let t = self.toks[self.pos].clone();
        if self.pos + 1 < self.toks.len() {
            self.pos += 1;
        }
        t
    }

    fn eat(&mut self, tok: &Tok) -> bool {
        if self.peek() == tok {
            self.advance();
            true
        } else {
            false
        }
    }

    fn expect(&mut self, tok: &Tok) -> Result<Span, DslError> {
        if self.peek() == tok {
            Ok(self.advance().span)
        } else {
            Err(self.unexpected(&format!("`{}`", tok.symbol())))
        }
    }

    fn unexpected(&self, wanted: &str) -> DslError {
        DslError::syntax(
            self.span(),
            format!("expected {wanted}, found {}", self.peek().describe()),
        )
    }

    fn is_kw(&self, kw: &str) -> bool {
        matches!(self.peek(), Tok::Ident(s) if s == kw)
    }

    fn eat_kw(&mut self, kw: &str) -> bool {
        if self.is_kw(kw) {
            self.advance();
            true
        } else {
            false
        }
    }

    fn expect_kw(&mut self, kw: &str) -> Result<(), DslError> {
        if self.eat_kw(kw) {
            Ok(())
        } else {
            Err(self.unexpected(&format!("`{kw}`")))
        }
    }

    fn ident(&mut self) -> Result<(String, Span), DslError> {
        match self.peek().clone() {
            Tok::Ident(s) if !KEYWORDS.contains(&s.as_str()) && proj_index(&s).is_none() => {
                let span = self.advance().span;
                Ok((s, span))
            }
            _ => Err(self.unexpected("an identifier")),
        }
    }

    fn skip_semis(&mut self) {
        while self.eat(&Tok::Semi) {}
    }

    fn static_value(&self, name: &str) -> Option<i64> {
        self.statics
            .iter()
            .rev()
            .find(|(n, _)| n == name)
            .map(|(_, v)| *v)
    }

    fn is_static_name(&self, name: &str) -> bool {
        self.loop_vars.iter().any(|v| v == name) || self.static_value(name).is_some()
    }

    // ---- headers -------------------------------------------------------

    fn program(&mut self) -> Result<Program, DslError> {
        let mut headers = Vec::new();
        let mut name = String::from("gadget");
        let mut shares = ShareStructure::default();
        let mut inputs = Vec::new();
        let mut order_seen = false;

        loop {
            self.skip_semis();
            if self.eat_kw("gadget") {
                let (n, _) = self.ident()?;
                name = n.clone();
                headers.push(Header::Gadget(n));
            } else if self.is_kw("order") || self.is_kw("param") {
                let is_order = self.is_kw("order");
                let kw_span = self.advance().span;
                let (n, _) = self.ident()?;
                self.expect(&Tok::Eq)?;
                let value = self.int_literal()?;
                let key = if is_order { ORDER_OVERRIDE } else { n.as_str() };
                let value = self.overrides.get(key).or_else(|| self.overrides.get(&n)).copied().unwrap_or(value);
                if self.static_value(&n).is_some() {
                    return Err(DslError::header(kw_span, format!("`{n}` declared twice")));
                }
                if is_order {
                    if order_seen {
                        return Err(DslError::header(kw_span, "masking order declared twice"));
                    }
                    if value < 0 {
                        return Err(DslError::header(kw_span, "masking order must be >= 0"));
                    }
                    order_seen = true;
                    shares.order = value as usize;
                    headers.push(Header::Order(n.clone(), value));
                } else {
                    headers.push(Header::Param(n.clone(), value));
                }
                self.statics.push((n, value));
            } else if self.is_kw("shares") {
                let span = self.advance().span;
                let (base, _) = self.ident()?;
                let dims = self.dims()?;
                if dims.is_empty() {
                    return Err(DslError::header(span, "shares need a share dimension"));
                }
                if !order_seen {
                    return Err(DslError::header(span, "`order` must precede `shares`"));
                }
                let ranges = self.eval_dims(&dims)?;
                let (share_range, family_ranges) = ranges.split_last().expect("non-empty dims");
                let width = share_range.1 - share_range.0 + 1;
                if width != shares.order as i64 + 1 {
                    return Err(DslError::header(
                        span,
                        format!(
                            "family `{base}` has {width} shares but the order is {} (expected {})",
                            shares.order,
                            shares.order + 1
                        ),
                    ));
                }
                for prefix in cartesian(family_ranges) {
                    let family = indexed_name(&base, &prefix);
                    let members: Vec<String> = (share_range.0..=share_range.1)
                        .map(|s| {
                            let mut idx = prefix.clone();
                            idx.push(s);
                            indexed_name(&base, &idx)
                        })
                        .collect();
                    for m in &members {
                        self.declare_input(&mut inputs, m, BaseType::Ring, span)?;
                    }
                    shares.families.push(ShareFamily {
                        name: family,
                        members,
                    });
                }
                headers.push(Header::Shares(base, dims, span));
            } else if self.is_kw("unshared") {
                let span = self.advance().span;
                let (base, _) = self.ident()?;
                let dims = if self.peek() == &Tok::LBrack {
                    self.dims()?
                } else {
                    Vec::new()
                };
                let ty = if self.eat(&Tok::Colon) {
                    if self.eat_kw("bool") {
                        BaseType::Bool
                    } else if self.eat_kw("ring") {
                        BaseType::Ring
                    } else {
                        return Err(self.unexpected("`bool` or `ring`"));
                    }
                } else {
                    BaseType::Ring
                };
                let ranges = self.eval_dims(&dims)?;
                for idx in cartesian(&ranges) {
                    let n = indexed_name(&base, &idx);
                    self.declare_input(&mut inputs, &n, ty, span)?;
                    shares.unshared.push(n);
                }
                headers.push(Header::Unshared(base, dims, ty, span));
            } else {
                break;
            }
        }
        if !order_seen {
            // gadgets without shared inputs may omit the order
            shares.order = 0;
        }

        let mut body = Vec::new();
        loop {
            self.skip_semis();
            if self.is_kw("return") || self.is_kw("ret") {
                self.advance();
                let ret = self.expr()?;
                self.skip_semis();
                if self.peek() != &Tok::Eof {
                    return Err(self.unexpected("end of input after the final return"));
                }
                return Ok(Program {
                    name,
                    headers,
                    statics: self.statics.clone(),
                    shares,
                    inputs,
                    body,
                    ret,
                });
            }
            if self.peek() == &Tok::Eof {
                return Err(self.unexpected("a statement or `return`"));
            }
            if self.is_kw("order")
                || self.is_kw("param")
                || self.is_kw("shares")
                || self.is_kw("unshared")
                || self.is_kw("gadget")
            {
                return Err(DslError::syntax(
                    self.span(),
                    "declarations must precede the first statement",
                ));
            }
            body.push(self.stmt()?);
        }
    }

    fn declare_input(
        &self,
        inputs: &mut Vec<InputDecl>,
        name: &str,
        ty: BaseType,
        span: Span,
    ) -> Result<(), DslError> {
        if inputs.iter().any(|i: &InputDecl| i.name == name) {
            return Err(DslError::header(span, format!("input `{name}` declared twice")));
        }
        inputs.push(InputDecl {
            name: name.to_string(),
            ty,
        });
        Ok(())
    }

    fn int_literal(&mut self) -> Result<i64, DslError> {
        let neg = self.eat(&Tok::Minus);
        match self.peek().clone() {
            Tok::Int(n) => {
                self.advance();
                let n = i64::try_from(n)
                    .map_err(|_| DslError::syntax(self.span(), "integer literal too large"))?;
                Ok(if neg { -n } else { n })
            }
            _ => Err(self.unexpected("an integer")),
        }
    }

    fn dims(&mut self) -> Result<Vec<Dim>, DslError> {
        let mut dims = Vec::new();
        while self.eat(&Tok::LBrack) {
            let a = self.iexpr()?;
            if self.eat(&Tok::DotDot) {
                let b = self.iexpr()?;
                dims.push(Dim::Range(a, b));
            } else {
                dims.push(Dim::Size(a));
            }
            self.expect(&Tok::RBrack)?;
        }
        Ok(dims)
    }

    fn eval_dims(&self, dims: &[Dim]) -> Result<Vec<(i64, i64)>, DslError> {
        let env: BTreeMap<String, i64> = self.statics.iter().cloned().collect();
        dims.iter()
            .map(|d| match d {
                Dim::Size(e) => Ok((0, eval_iexpr(e, &env)? - 1)),
                Dim::Range(a, b) => Ok((eval_iexpr(a, &env)?, eval_iexpr(b, &env)?)),
            })
            .collect()
    }

    // ---- statements ------------------------------------------------------

    fn stmt(&mut self) -> Result<Stmt, DslError> {
        let span = self.span();
        if self.eat_kw("for") {
            return Ok(Stmt::For(self.for_loop(span)?));
        }
        if self.eat_kw("if") {
            let cond = self.cond()?;
            let then = self.stmt_block()?;
            let els = if self.eat_kw("else") {
                self.stmt_block()?
            } else {
                Vec::new()
            };
            return Ok(Stmt::StaticIf {
                cond,
                then,
                els,
                span,
            });
        }
        let target = self.var_ref_target()?;
        self.expect(&Tok::Arrow)?;
        let rhs = self.rhs()?;
        Ok(Stmt::Bind { target, rhs, span })
    }

    fn stmt_block(&mut self) -> Result<Vec<Stmt>, DslError> {
        self.expect(&Tok::LBrace)?;
        let mut stmts = Vec::new();
        loop {
            self.skip_semis();
            if self.eat(&Tok::RBrace) {
                return Ok(stmts);
            }
            if self.is_kw("return") || self.is_kw("ret") {
                return Err(DslError::syntax(
                    self.span(),
                    "`return` is only allowed in accumulator loops and program blocks",
                ));
            }
            stmts.push(self.stmt()?);
        }
    }

    fn for_loop(&mut self, span: Span) -> Result<ForLoop, DslError> {
        let (var, vspan) = self.ident()?;
        if self.is_static_name(&var) {
            return Err(DslError::syntax(vspan, format!("`{var}` shadows a static name")));
        }
        self.expect_kw("in")?;
        let start = self.bound_expr()?;
        self.expect(&Tok::DotDot)?;
        let end = self.bound_expr()?;
        let acc = if self.eat_kw("acc") {
            let (name, _) = self.ident()?;
            self.expect_kw("init")?;
            let init = self.expr()?;
            Some((name, init))
        } else {
            None
        };
        self.expect(&Tok::LBrace)?;
        self.loop_vars.push(var.clone());
        let mut body = Vec::new();
        let mut ret = None;
        loop {
            self.skip_semis();
            if self.eat(&Tok::RBrace) {
                break;
            }
            if self.is_kw("return") || self.is_kw("ret") {
                let rspan = self.advance().span;
                if acc.is_none() {
                    return Err(DslError::syntax(
                        rspan,
                        "`return` inside a loop requires an `acc` accumulator",
                    ));
                }
                ret = Some(self.expr()?);
                self.skip_semis();
                self.expect(&Tok::RBrace)?;
                break;
            }
            body.push(self.stmt()?);
        }
        self.loop_vars.pop();
        if acc.is_some() && ret.is_none() {
            return Err(DslError::syntax(
                span,
                "accumulator loop body must end with `return`",
            ));
        }
        Ok(ForLoop {
            var,
            start,
            end,
            acc,
            body,
            ret,
            span,
        })
    }

    /// Loop bounds: like [`Self::iexpr`] but with a dedicated diagnostic.
    fn bound_expr(&mut self) -> Result<IExpr, DslError> {
        self.iexpr().map_err(|e| match e {
            DslError::NonConstant { name, span } => DslError::NonConstantBound { name, span },
            other => other,
        })
    }

    fn rhs(&mut self) -> Result<Rhs, DslError> {
        if self.eat_kw("unif") {
            return Ok(Rhs::Unif);
        }
        if self.is_kw("if") {
            // program-level conditional when the branches are blocks
            let save = self.pos;
            self.advance();
            let cond = self.expr()?;
            self.expect_kw("then")?;
            if self.peek() == &Tok::LBrace {
                let then_b = self.prog_block()?;
                self.expect_kw("else")?;
                let else_b = self.prog_block()?;
                return Ok(Rhs::If(cond, then_b, else_b));
            }
            self.pos = save;
        }
        self.eat_kw("ret");
        Ok(Rhs::Ret(self.expr()?))
    }

    fn prog_block(&mut self) -> Result<Block, DslError> {
        self.expect(&Tok::LBrace)?;
        let mut stmts = Vec::new();
        loop {
            self.skip_semis();
            if self.is_kw("return") || self.is_kw("ret") {
                self.advance();
                let ret = self.expr()?;
                self.skip_semis();
                self.expect(&Tok::RBrace)?;
                return Ok(Block { stmts, ret });
            }
            if self.peek() == &Tok::RBrace {
                return Err(self.unexpected("`return` at the end of the block"));
            }
            stmts.push(self.stmt()?);
        }
    }

    fn var_ref_target(&mut self) -> Result<VarRef, DslError> {
        let (base, span) = self.ident()?;
        if self.is_static_name(&base) {
            return Err(DslError::syntax(
                span,
                format!("cannot assign to static name `{base}`"),
            ));
        }
        let indices = self.indices()?;
        Ok(VarRef {
            base,
            indices,
            span,
        })
    }

    fn indices(&mut self) -> Result<Vec<IExpr>, DslError> {
        let mut indices = Vec::new();
        while self.eat(&Tok::LBrack) {
            indices.push(self.iexpr()?);
            self.expect(&Tok::RBrack)?;
        }
        Ok(indices)
    }

    // ---- static expressions ------------------------------------------------

    fn iexpr(&mut self) -> Result<IExpr, DslError> {
        let mut lhs = self.iterm()?;
        loop {
            let op = match self.peek() {
                Tok::Plus => IOp::Add,
                Tok::Minus => IOp::Sub,
                _ => return Ok(lhs),
            };
            self.advance();
            let rhs = self.iterm()?;
            lhs = IExpr::Bin(op, Box::new(lhs), Box::new(rhs));
        }
    }

    fn iterm(&mut self) -> Result<IExpr, DslError> {
        let mut lhs = self.iatom()?;
        while self.peek() == &Tok::Star {
            let span = self.advance().span;
            let rhs = self.iatom()?;
            if !is_constant(&lhs) && !is_constant(&rhs) {
                return Err(DslError::syntax(
                    span,
                    "index expressions must be affine (one side of `*` must be constant)",
                ));
            }
            lhs = IExpr::Bin(IOp::Mul, Box::new(lhs), Box::new(rhs));
        }
        Ok(lhs)
    }

    fn iatom(&mut self) -> Result<IExpr, DslError> {
        match self.peek().clone() {
            Tok::Int(_) => Ok(IExpr::Int(self.int_literal()?)),
            Tok::Minus => {
                self.advance();
                Ok(IExpr::Neg(Box::new(self.iatom()?)))
            }
            Tok::LParen => {
                self.advance();
                let e = self.iexpr()?;
                self.expect(&Tok::RParen)?;
                Ok(e)
            }
            Tok::Ident(name) => {
                let span = self.advance().span;
                if self.is_static_name(&name) {
                    Ok(IExpr::Name(name, span))
                } else {
                    Err(DslError::NonConstant { name, span })
                }
            }
            _ => Err(self.unexpected("an index expression")),
        }
    }

    fn cond(&mut self) -> Result<Cond, DslError> {
        let mut lhs = self.cond_and()?;
        while self.eat(&Tok::OrOr) {
            let rhs = self.cond_and()?;
            lhs = Cond::Or(Box::new(lhs), Box::new(rhs));
        }
        Ok(lhs)
    }

    fn cond_and(&mut self) -> Result<Cond, DslError> {
        let mut lhs = self.cond_atom()?;
        while self.eat(&Tok::AndAnd) {
            let rhs = self.cond_atom()?;
            lhs = Cond::And(Box::new(lhs), Box::new(rhs));
        }
        Ok(lhs)
    }

    fn cond_atom(&mut self) -> Result<Cond, DslError> {
        if self.eat(&Tok::Bang) {
            return Ok(Cond::Not(Box::new(self.cond_atom()?)));
        }
        if self.peek() == &Tok::LParen {
            let save = self.pos;
            self.advance();
            if let Ok(c) = self.cond() {
                if self.eat(&Tok::RParen) {
                    return Ok(c);
                }
            }
            self.pos = save;
        }
        let a = self.iexpr()?;
        let op = match self.peek() {
            Tok::EqEq => CmpOp::Eq,
            Tok::Ne => CmpOp::Ne,
            Tok::Lt => CmpOp::Lt,
            Tok::Le => CmpOp::Le,
            Tok::Gt => CmpOp::Gt,
            Tok::Ge => CmpOp::Ge,
            _ => return Err(self.unexpected("a comparison operator")),
        };
        self.advance();
        let b = self.iexpr()?;
        Ok(Cond::Cmp(op, a, b))
    }

    // ---- program expressions ---------------------------------------------

    fn expr(&mut self) -> Result<Expr, DslError> {
        if self.is_kw("if") {
            let span = self.advance().span;
            let c = self.expr()?;
            self.expect_kw("then")?;
            let a = self.expr()?;
            self.expect_kw("else")?;
            let b = self.expr()?;
            return Ok(Expr::Ite(Box::new(c), Box::new(a), Box::new(b), span));
        }
        self.or_expr()
    }

    fn or_expr(&mut self) -> Result<Expr, DslError> {
        let mut lhs = self.and_expr()?;
        while self.peek() == &Tok::OrOr {
            let span = self.advance().span;
            let rhs = self.and_expr()?;
            lhs = Expr::Bin(BinOp::Or, Box::new(lhs), Box::new(rhs), span);
        }
        Ok(lhs)
    }

    fn and_expr(&mut self) -> Result<Expr, DslError> {
        let mut lhs = self.cmp_expr()?;
        while self.peek() == &Tok::AndAnd {
            let span = self.advance().span;
            let rhs = self.cmp_expr()?;
            lhs = Expr::Bin(BinOp::And, Box::new(lhs), Box::new(rhs), span);
        }
        Ok(lhs)
    }

    fn cmp_expr(&mut self) -> Result<Expr, DslError> {
        let lhs = self.add_expr()?;
        let op = match self.peek() {
            Tok::EqEq => BinOp::Eq,
            Tok::Ne => BinOp::Ne,
            _ => return Ok(lhs),
        };
        let span = self.advance().span;
        let rhs = self.add_expr()?;
        Ok(Expr::Bin(op, Box::new(lhs), Box::new(rhs), span))
    }

    fn add_expr(&mut self) -> Result<Expr, DslError> {
        let mut lhs = self.mul_expr()?;
        loop {
            let op = match self.peek() {
                Tok::Plus => BinOp::Add,
                Tok::Minus => BinOp::Sub,
                _ => return Ok(lhs),
            };
            let span = self.advance().span;
            let rhs = self.mul_expr()?;
            lhs = Expr::Bin(op, Box::new(lhs), Box::new(rhs), span);
        }
    }

    fn mul_expr(&mut self) -> Result<Expr, DslError> {
        let mut lhs = self.unary_expr()?;
        while self.peek() == &Tok::Star {
            let span = self.advance().span;
            let rhs = self.unary_expr()?;
            lhs = Expr::Bin(BinOp::Mul, Box::new(lhs), Box::new(rhs), span);
        }
        Ok(lhs)
    }

    fn unary_expr(&mut self) -> Result<Expr, DslError> {
        if self.peek() == &Tok::Minus {
            let span = self.advance().span;
            return Ok(Expr::Neg(Box::new(self.unary_expr()?), span));
        }
        if let Tok::Ident(s) = self.peek().clone() {
            if let Some(k) = proj_index(&s) {
                let span = self.advance().span;
                if k == 0 {
                    return Err(DslError::syntax(span, "projections are 1-based"));
                }
                return Ok(Expr::Proj(k, Box::new(self.unary_expr()?), span));
            }
        }
        self.primary()
    }

    fn primary(&mut self) -> Result<Expr, DslError> {
        let span = self.span();
        match self.peek().clone() {
            Tok::Int(n) => {
                self.advance();
                Ok(Expr::Int(n, span))
            }
            Tok::Ident(s) if s == "T" || s == "true" => {
                self.advance();
                Ok(Expr::Bool(true))
            }
            Tok::Ident(s) if s == "F" || s == "false" => {
                self.advance();
                Ok(Expr::Bool(false))
            }
            Tok::Ident(s) if !KEYWORDS.contains(&s.as_str()) => {
                let (base, span) = self.ident()?;
                if self.is_static_name(&base) {
                    if self.peek() == &Tok::LBrack {
                        return Err(DslError::syntax(
                            span,
                            format!("static name `{base}` cannot be indexed"),
                        ));
                    }
                    return Ok(Expr::Static(IExpr::Name(base, span)));
                }
                let indices = self.indices()?;
                Ok(Expr::Var(VarRef {
                    base,
                    indices,
                    span,
                }))
            }
            Tok::LParen => {
                if let Some(for_pos) = self.comprehension_for() {
                    return self.comprehension(for_pos);
                }
                self.advance();
                if self.eat(&Tok::RParen) {
                    return Ok(Expr::Tuple(Vec::new()));
                }
                let first = self.expr()?;
                if self.eat(&Tok::RParen) {
                    return Ok(first);
                }
                let mut items = vec![first];
                while self.eat(&Tok::Comma) {
                    if self.peek() == &Tok::RParen {
                        break;
                    }
                    items.push(self.expr()?);
                }
                self.expect(&Tok::RParen)?;
                Ok(Expr::Tuple(items))
            }
            _ => Err(self.unexpected("an expression")),
        }
    }

    /// Position of a top-level `for` inside the parenthesis at the cursor.
    fn comprehension_for(&self) -> Option<usize> {
        let mut depth = 0i32;
        let mut i = self.pos;
        loop {
            match &self.toks[i].tok {
                Tok::LParen | Tok::LBrack | Tok::LBrace => depth += 1,
                Tok::RParen | Tok::RBrack | Tok::RBrace => {
                    depth -= 1;
                    if depth == 0 {
                        return None;
                    }
                }
                Tok::Ident(s) if s == "for" && depth == 1 => return Some(i),
                Tok::Eof => return None,
                _ => {}
            }
            i += 1;
        }
    }

    /// `(body for i in a..b ...)`. Generators are read first so that the body
    /// sees their variables as static names.
    fn comprehension(&mut self, for_pos: usize) -> Result<Expr, DslError> {
        let open = self.pos;
        self.pos = for_pos;
        let mut gens = Vec::new();
        let depth = self.loop_vars.len();
        while self.eat_kw("for") {
            let (var, vspan) = self.ident()?;
            if self.is_static_name(&var) {
                return Err(DslError::syntax(vspan, format!("`{var}` shadows a static name")));
            }
            self.expect_kw("in")?;
            let start = self.bound_expr()?;
            self.expect(&Tok::DotDot)?;
            let end = self.bound_expr()?;
            self.loop_vars.push(var.clone());
            gens.push(Generator { var, start, end });
        }
        self.expect(&Tok::RParen)?;
        let after = self.pos;
        self.pos = open + 1;
        let body = self.expr();
        let end = self.pos;
        self.loop_vars.truncate(depth);
        let body = body?;
        if end != for_pos {
            self.pos = end;
            return Err(self.unexpected("`for`"));
        }
        self.pos = after;
        Ok(Expr::Comprehension(Box::new(body), gens))
    }
}

fn proj_index(s: &str) -> Option<usize> {
    s.strip_prefix("proj_").and_then(|d| d.parse().ok())
}

fn is_constant(e: &IExpr) -> bool {
    match e {
        IExpr::Int(_) => true,
        IExpr::Name(..) => false,
        IExpr::Neg(a) => is_constant(a),
        IExpr::Bin(_, a, b) => is_constant(a) && is_constant(b),
    }
}

pub(crate) fn indexed_name(base: &str, idx: &[i64]) -> String {
    let mut s = base.to_string();
    for i in idx {
        s.push('[');
        s.push_str(&i.to_string());
        s.push(']');
    }
    s
}

fn cartesian(ranges: &[(i64, i64)]) -> Vec<Vec<i64>> {
    let mut acc: Vec<Vec<i64>> = vec![Vec::new()];
    for &(lo, hi) in ranges {
        let mut next = Vec::new();
        for prefix in &acc {
            for v in lo..=hi {
                let mut p = prefix.clone();
                p.push(v);
                next.push(p);
            }
        }
        acc = next;
    }
    acc
}

/// Evaluates a static expression in `env`.
pub(crate) fn eval_iexpr(e: &IExpr, env: &BTreeMap<String, i64>) -> Result<i64, DslError> {
    Ok(match e {
        IExpr::Int(n) => *n,
        IExpr::Name(n, span) => *env.get(n).ok_or_else(|| DslError::NonConstant {
            name: n.clone(),
            span: *span,
        })?,
        IExpr::Neg(a) => -eval_iexpr(a, env)?,
        IExpr::Bin(op, a, b) => {
            let (a, b) = (eval_iexpr(a, env)?, eval_iexpr(b, env)?);
            match op {
                IOp::Add => a + b,
                IOp::Sub => a - b,
                IOp::Mul => a * b,
            }
        }
    })
}

pub(crate) fn eval_cond(c: &Cond, env: &BTreeMap<String, i64>) -> Result<bool, DslError> {
    Ok(match c {
        Cond::Cmp(op, a, b) => {
            let (a, b) = (eval_iexpr(a, env)?, eval_iexpr(b, env)?);
            match op {
                CmpOp::Eq => a == b,
                CmpOp::Ne => a != b,
                CmpOp::Lt => a < b,
                CmpOp::Le => a <= b,
                CmpOp::Gt => a > b,
                CmpOp::Ge => a >= b,
            }
        }
        Cond::And(a, b) => eval_cond(a, env)? && eval_cond(b, env)?,
        Cond::Or(a, b) => eval_cond(a, env)? || eval_cond(b, env)?,
        Cond::Not(a) => !eval_cond(a, env)?,
    })
}
