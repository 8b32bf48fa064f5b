//! Runtime values over the ring Z_q.

use std::fmt;

use serde::ser::{Serialize, SerializeSeq, Serializer};

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Value {
    /// Residue in `[0, q)`.
    Ring(u32),
    Bool(bool),
    Index(i64),
    Tuple(Vec<Value>),
}

impl Value {
    pub fn as_ring(&self) -> Option<u32> {
        match self {
            Value::Ring(r) => Some(*r),
            _ => None,
        }
    }

    pub fn as_bool(&self) -> Option<bool> {
        match self {
            Value::Bool(b) => Some(*b),
            _ => None,
        }
    }
}

impl fmt::Display for Value {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Value::Ring(r) => write!(f, "{r}"),
            Value::Bool(b) => write!(f, "{}", if *b { "T" } else { "F" }),
            Value::Index(i) => write!(f, "{i}"),
            Value::Tuple(items) => {
                write!(f, "(")?;
                for (i, v) in items.iter().enumerate() {
                    if i > 0 {
                        write!(f, ", ")?;
                    }
                    write!(f, "{v}")?;
                }
                write!(f, ")")
            }
        }
    }
}

impl Serialize for Value {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        match self {
            Value::Ring(r) => s.serialize_u32(*r),
            Value::Bool(b) => s.serialize_bool(*b),
            Value::Index(i) => s.serialize_i64(*i),
            Value::Tuple(items) => {
                let mut seq = s.serialize_seq(Some(items.len()))?;
                for v in items {
                    seq.serialize_element(v)?;
                }
                seq.end()
            }
        }
    }
}

/// A ring modulus `q >= 2`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct Modulus(u32);

impl Modulus {
    pub fn new(q: u32) -> Option<Self> {
        (q >= 2).then_some(Modulus(q))
    }

    pub fn get(self) -> u32 {
        self.0
    }

    pub fn reduce(self, v: u64) -> u32 {
        (v % self.0 as u64) as u32
    }

    pub fn add(self, a: u32, b: u32) -> u32 {
        self.reduce(a as u64 + b as u64)
    }

    pub fn sub(self, a: u32, b: u32) -> u32 {
        self.reduce(a as u64 + self.0 as u64 - b as u64)
    }

    pub fn mul(self, a: u32, b: u32) -> u32 {
        self.reduce(a as u64 * b as u64)
    }

    pub fn neg(self, a: u32) -> u32 {
        self.sub(0, a)
    }
}
