//! Exact finite distributions with rational probabilities.

use std::collections::BTreeMap;

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{One, Zero};
use serde::Serialize;

use super::{SemanticsError, Value};

/// Probability map over value tuples. Entries with probability zero are never
/// stored, and the probabilities sum to one.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FiniteDistribution {
    support: BTreeMap<Vec<Value>, BigRational>,
}

impl FiniteDistribution {
    pub fn point(v: Vec<Value>) -> Self {
        let mut support = BTreeMap::new();
        support.insert(v, BigRational::one());
        FiniteDistribution { support }
    }

    /// Normalizes non-negative integer weights. Returns `None` when all are zero.
    pub fn from_weights<I>(weights: I) -> Option<Self>
    where
        I: IntoIterator<Item = (Vec<Value>, BigInt)>,
    {
        let mut acc: BTreeMap<Vec<Value>, BigInt> = BTreeMap::new();
        for (v, w) in weights {
            assert!(w >= BigInt::zero(), "negative weight");
            if !w.is_zero() {
                *acc.entry(v).or_insert_with(BigInt::zero) += w;
            }
        }
        let total: BigInt = acc.values().sum();
        if total.is_zero() {
            return None;
        }
        let support = acc
            .into_iter()
            .map(|(v, w)| (v, BigRational::new(w, total.clone())))
            .collect();
        Some(FiniteDistribution { support })
    }

    /// Builds a distribution from explicit probabilities. They must be
    /// non-negative and sum to one.
    pub fn from_probabilities<I>(entries: I) -> Result<Self, SemanticsError>
    where
        I: IntoIterator<Item = (Vec<Value>, BigRational)>,
    {
        let mut support: BTreeMap<Vec<Value>, BigRational> = BTreeMap::new();
        for (v, p) in entries {
            if p < BigRational::zero() {
                return Err(SemanticsError::NotNormalized);
            }
            if !p.is_zero() {
                *support.entry(v).or_insert_with(BigRational::zero) += p;
            }
        }
        let total: BigRational = support.values().sum();
        if !total.is_one() {
            return Err(SemanticsError::NotNormalized);
        }
        Ok(FiniteDistribution { support })
    }

    pub fn support(&self) -> &BTreeMap<Vec<Value>, BigRational> {
        &self.support
    }

    pub fn prob(&self, v: &[Value]) -> BigRational {
        self.support.get(v).cloned().unwrap_or_else(BigRational::zero)
    }

    pub fn total(&self) -> BigRational {
        self.support.values().sum()
    }

    /// Tuple width, or `None` for an empty support (never produced).
    pub fn width(&self) -> Option<usize> {
        self.support.keys().next().map(Vec::len)
    }

    fn check_positions(&self, positions: &[usize]) -> Result<(), SemanticsError> {
        let w = self.width().unwrap_or(0);
        match positions.iter().find(|&&p| p >= w) {
            Some(&p) => Err(SemanticsError::InvalidPosition { position: p, width: w }),
            None => Ok(()),
        }
    }

    /// Pushforward along the projection onto `positions` (0-based, in the given order).
    pub fn marginal(&self, positions: &[usize]) -> Result<Self, SemanticsError> {
        self.check_positions(positions)?;
        let mut support: BTreeMap<Vec<Value>, BigRational> = BTreeMap::new();
        for (v, p) in &self.support {
            let key: Vec<Value> = positions.iter().map(|&i| v[i].clone()).collect();
            *support.entry(key).or_insert_with(BigRational::zero) += p;
        }
        Ok(FiniteDistribution { support })
    }

    /// Restriction to tuples with `v[positions[k]] == values[k]`, renormalized.
    /// The result keeps every position.
    pub fn condition(&self, positions: &[usize], values: &[Value]) -> Result<Self, SemanticsError> {
        self.check_positions(positions)?;
        assert_eq!(positions.len(), values.len(), "one value per conditioned position");
        let kept: Vec<(&Vec<Value>, &BigRational)> = self
            .support
            .iter()
            .filter(|(v, _)| positions.iter().zip(values).all(|(&i, x)| &v[i] == x))
            .collect();
        let mass: BigRational = kept.iter().map(|(_, p)| (*p).clone()).sum();
        if mass.is_zero() {
            return Err(SemanticsError::UndefinedConditional);
        }
        let support = kept
            .into_iter()
            .map(|(v, p)| (v.clone(), p / &mass))
            .collect();
        Ok(FiniteDistribution { support })
    }

    /// Mixture `sum_k w_k * d_k`; the weights must sum to one.
    pub fn mixture<'a, I>(parts: I) -> Result<Self, SemanticsError>
    where
        I: IntoIterator<Item = (BigRational, &'a FiniteDistribution)>,
    {
        let mut entries = Vec::new();
        for (w, d) in parts {
            for (v, p) in &d.support {
                entries.push((v.clone(), &w * p));
            }
        }
        Self::from_probabilities(entries)
    }

    pub fn to_json(&self) -> DistributionJson {
        DistributionJson {
            support: self
                .support
                .iter()
                .map(|(v, p)| SupportEntry {
                    value: v.clone(),
                    p: rational_string(p),
                })
                .collect(),
        }
    }
}

/// `"num/den"` rendering of a probability.
pub fn rational_string(p: &BigRational) -> String {
    format!("{}/{}", p.numer(), p.denom())
}

/// Serialized form: support entries sorted by value.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct DistributionJson {
    pub support: Vec<SupportEntry>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct SupportEntry {
    pub value: Vec<Value>,
    pub p: String,
}
