//! Linear normal forms over input and uniform atoms. Products, comparisons
//! and conditionals are kept as opaque subterms.

use std::collections::{BTreeMap, BTreeSet};
use std::sync::Arc;

use crate::semantics::Modulus;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, serde::Serialize, serde::Deserialize)]
#[serde(tag = "kind", content = "index", rename_all = "lowercase")]
pub enum Atom {
    /// Input by declaration position.
    Input(usize),
    /// The k-th `unif` binding of the program.
    Uniform(usize),
    /// A uniform introduced by a bijection rewrite.
    Fresh(usize),
}

impl Atom {
    pub fn is_uniform(self) -> bool {
        matches!(self, Atom::Uniform(_) | Atom::Fresh(_))
    }
}

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Monomial {
    Atom(Atom),
    Opaque(Arc<Opaque>),
}

/// Non-linear subterms, compared structurally.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Opaque {
    /// Product of two non-constant forms, factors in sorted order.
    Mul(LinearForm, LinearForm),
    /// Ring-valued conditional.
    Ite(BoolTerm, LinearForm, LinearForm),
    /// `lhs - rhs == 0`, stored as the difference.
    EqZero(LinearForm),
    EqBool(BoolTerm, BoolTerm),
    And(BoolTerm, BoolTerm),
    Or(BoolTerm, BoolTerm),
    Not(BoolTerm),
    IteBool(BoolTerm, BoolTerm, BoolTerm),
}

/// `constant + sum coeff * monomial` over Z_q; coefficients are in `[1, q)`.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Default)]
pub struct LinearForm {
    pub terms: BTreeMap<Monomial, u32>,
    pub constant: u32,
}

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum BoolTerm {
    Const(bool),
    Atom(Atom),
    Opaque(Arc<Opaque>),
}

impl LinearForm {
    pub fn constant(c: u32) -> Self {
        LinearForm {
            terms: BTreeMap::new(),
            constant: c,
        }
    }

    pub fn atom(a: Atom) -> Self {
        Self::monomial(Monomial::Atom(a))
    }

    pub fn monomial(m: Monomial) -> Self {
        let mut terms = BTreeMap::new();
        terms.insert(m, 1);
        LinearForm { terms, constant: 0 }
    }

    pub fn is_constant(&self) -> bool {
        self.terms.is_empty()
    }

    /// `Some(a)` when the form is exactly `1 * a`.
    pub fn as_bare_atom(&self) -> Option<Atom> {
        match (self.constant, self.terms.len()) {
            (0, 1) => match self.terms.iter().next() {
                Some((Monomial::Atom(a), 1)) => Some(*a),
                _ => None,
            },
            _ => None,
        }
    }

    pub fn add(&self, other: &LinearForm, q: Modulus) -> LinearForm {
        let mut out = self.clone();
        out.constant = q.add(out.constant, other.constant);
        for (m, &c) in &other.terms {
            let e = out.terms.entry(m.clone()).or_insert(0);
            *e = q.add(*e, c);
            if *e == 0 {
                out.terms.remove(m);
            }
        }
        out
    }

    pub fn scale(&self, k: u32, q: Modulus) -> LinearForm {
        let k = q.reduce(k as u64);
        if k == 0 {
            return LinearForm::constant(0);
        }
        LinearForm {
            terms: self
                .terms
                .iter()
                .map(|(m, &c)| (m.clone(), q.mul(c, k)))
                .filter(|(_, c)| *c != 0)
                .collect(),
            constant: q.mul(self.constant, k),
        }
    }

    pub fn neg(&self, q: Modulus) -> LinearForm {
        self.scale(q.get() - 1, q)
    }

    pub fn sub(&self, other: &LinearForm, q: Modulus) -> LinearForm {
        self.add(&other.neg(q), q)
    }

    pub fn mul(&self, other: &LinearForm, q: Modulus) -> LinearForm {
        if self.is_constant() {
            return other.scale(self.constant, q);
        }
        if other.is_constant() {
            return self.scale(other.constant, q);
        }
        let (a, b) = if self <= other {
            (self.clone(), other.clone())
        } else {
            (other.clone(), self.clone())
        };
        LinearForm::monomial(Monomial::Opaque(Arc::new(Opaque::Mul(a, b))))
    }

    /// Coefficient of a bare atom in the linear part.
    pub fn coeff(&self, a: Atom) -> u32 {
        self.terms.get(&Monomial::Atom(a)).copied().unwrap_or(0)
    }

    pub fn atoms_into(&self, out: &mut BTreeSet<Atom>) {
        for m in self.terms.keys() {
            match m {
                Monomial::Atom(a) => {
                    out.insert(*a);
                }
                Monomial::Opaque(o) => o.atoms_into(out),
            }
        }
    }

    /// Atoms occurring inside opaque monomials only.
    pub fn opaque_atoms_into(&self, out: &mut BTreeSet<Atom>) {
        for m in self.terms.keys() {
            if let Monomial::Opaque(o) = m {
                o.atoms_into(out);
            }
        }
    }
}

impl BoolTerm {
    pub fn atoms_into(&self, out: &mut BTreeSet<Atom>) {
        match self {
            BoolTerm::Const(_) => {}
            BoolTerm::Atom(a) => {
                out.insert(*a);
            }
            BoolTerm::Opaque(o) => o.atoms_into(out),
        }
    }

    pub fn opaque(o: Opaque) -> BoolTerm {
        BoolTerm::Opaque(Arc::new(o))
    }
}

impl Opaque {
    pub fn atoms_into(&self, out: &mut BTreeSet<Atom>) {
        match self {
            Opaque::Mul(a, b) => {
                a.atoms_into(out);
                b.atoms_into(out);
            }
            Opaque::Ite(c, a, b) => {
                c.atoms_into(out);
                a.atoms_into(out);
                b.atoms_into(out);
            }
            Opaque::EqZero(a) => a.atoms_into(out),
            Opaque::EqBool(a, b) | Opaque::And(a, b) | Opaque::Or(a, b) => {
                a.atoms_into(out);
                b.atoms_into(out);
            }
            Opaque::Not(a) => a.atoms_into(out),
            Opaque::IteBool(c, a, b) => {
                c.atoms_into(out);
                a.atoms_into(out);
                b.atoms_into(out);
            }
        }
    }
}

/// Symbolic value of a variable.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub enum SymValue {
    Ring(LinearForm),
    Bool(BoolTerm),
    Index(i64),
    Tuple(Vec<SymValue>),
}

impl SymValue {
    pub fn atoms(&self) -> BTreeSet<Atom> {
        let mut out = BTreeSet::new();
        self.atoms_into(&mut out);
        out
    }

    pub fn atoms_into(&self, out: &mut BTreeSet<Atom>) {
        match self {
            SymValue::Ring(f) => f.atoms_into(out),
            SymValue::Bool(b) => b.atoms_into(out),
            SymValue::Index(_) => {}
            SymValue::Tuple(items) => items.iter().for_each(|i| i.atoms_into(out)),
        }
    }

    /// Scalar components in order.
    pub fn components(&self) -> Vec<SymValue> {
        match self {
            SymValue::Tuple(items) => items.iter().flat_map(|i| i.components()).collect(),
            other => vec![other.clone()],
        }
    }
}
