//! (I,O)-noninterference, conditional independence and witness search.

use std::collections::{BTreeMap, BTreeSet};

use num_bigint::BigInt;
use num_integer::Integer;
use num_traits::{One, Zero};
use serde_json::json;

use super::{Kernel, OracleError};
use crate::dsl::FlatProgram;
use crate::semantics::{interpret, Assignment, FiniteDistribution, Modulus, Value};

/// Two assignments that agree on `kept` but induce different marginals on
/// `probes`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Counterexample {
    pub kept: Vec<String>,
    pub probes: Vec<String>,
    pub left: Assignment,
    pub right: Assignment,
    pub left_dist: FiniteDistribution,
    pub right_dist: FiniteDistribution,
}

impl Counterexample {
    fn from_pair(k: &Kernel, kept: &[usize], probes: &[usize], (a, b): (usize, usize)) -> Self {
        let p = k.program();
        Counterexample {
            kept: kept.iter().map(|&i| p.inputs[i].name.clone()).collect(),
            probes: probes.iter().map(|&o| p.outputs[o].name.clone()).collect(),
            left: k.assignment(a),
            right: k.assignment(b),
            left_dist: k.distribution(a, probes),
            right_dist: k.distribution(b, probes),
        }
    }

    /// Re-derives both marginals with the interpreter, independently of the
    /// kernel table, and checks that the pair is a genuine distinguisher.
    pub fn recheck(&self, program: &FlatProgram, q: Modulus, cap: u64) -> Result<bool, OracleError> {
        let exposed = crate::dsl::expose_internals(program);
        if self.kept.iter().any(|i| self.left.get(i) != self.right.get(i)) {
            return Ok(false);
        }
        let pos: Vec<usize> = self
            .probes
            .iter()
            .map(|n| {
                exposed
                    .outputs
                    .iter()
                    .position(|o| &o.name == n)
                    .ok_or_else(|| OracleError::UnknownOutput(n.clone()))
            })
            .collect::<Result<_, _>>()?;
        let l = interpret(&exposed, &self.left, q, cap)?.marginal(&pos)?;
        let r = interpret(&exposed, &self.right, q, cap)?.marginal(&pos)?;
        Ok(l != r && l == self.left_dist && r == self.right_dist)
    }

    pub fn to_json(&self) -> serde_json::Value {
        json!({
            "kept": self.kept,
            "probes": self.probes,
            "left": self.left,
            "right": self.right,
            "left_distribution": self.left_dist.to_json(),
            "right_distribution": self.right_dist.to_json(),
        })
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum IoVerdict {
    Verified,
    Refuted(Box<Counterexample>),
}

impl IoVerdict {
    pub fn is_verified(&self) -> bool {
        matches!(self, IoVerdict::Verified)
    }
}

/// Decides (I,O)-NI: every two assignments agreeing on `inputs` induce the
/// same exact distribution on `outputs`.
pub fn check_io_ni(k: &Kernel, inputs: &[String], outputs: &[String]) -> Result<IoVerdict, OracleError> {
    let i = k.input_positions(inputs)?;
    let o = k.output_positions(outputs)?;
    Ok(check_io_ni_positions(k, &i, &o))
}

pub fn check_io_ni_positions(k: &Kernel, inputs: &[usize], outputs: &[usize]) -> IoVerdict {
    match k.distinguishing_pair(inputs, outputs) {
        None => IoVerdict::Verified,
        Some(pair) => IoVerdict::Refuted(Box::new(Counterexample::from_pair(k, inputs, outputs, pair))),
    }
}

/// `A ⟂ B | C` in `joint`, with integer cross-multiplication
/// `P(a,b,c) P(c) = P(a,c) P(b,c)` after scaling to a common denominator.
pub fn check_cond_indep(
    joint: &FiniteDistribution,
    a: &[usize],
    b: &[usize],
    c: &[usize],
) -> Result<bool, OracleError> {
    let mut seen = BTreeSet::new();
    for &p in a.iter().chain(b).chain(c) {
        if !seen.insert(p) {
            return Err(OracleError::Overlap(p));
        }
    }
    if let Some(w) = joint.width() {
        if let Some(&p) = seen.iter().find(|&&p| p >= w) {
            return Err(OracleError::Semantics(crate::semantics::SemanticsError::InvalidPosition {
                position: p,
                width: w,
            }));
        }
    }
    let denom = joint
        .support()
        .values()
        .fold(BigInt::one(), |acc, p| acc.lcm(p.denom()));
    let proj = |v: &[Value], pos: &[usize]| -> Vec<Value> { pos.iter().map(|&i| v[i].clone()).collect() };
    type Table = BTreeMap<Vec<Value>, BigInt>;
    type Triple = (Vec<Value>, Vec<Value>, Vec<Value>);
    let mut abc: BTreeMap<Triple, BigInt> = BTreeMap::new();
    let mut ac: Table = BTreeMap::new();
    let mut bc: Table = BTreeMap::new();
    let mut cc: Table = BTreeMap::new();
    let mut a_by_c: BTreeMap<Vec<Value>, BTreeSet<Vec<Value>>> = BTreeMap::new();
    let mut b_by_c: BTreeMap<Vec<Value>, BTreeSet<Vec<Value>>> = BTreeMap::new();
    for (v, p) in joint.support() {
        let w = p.numer() * (&denom / p.denom());
        let (va, vb, vc) = (proj(v, a), proj(v, b), proj(v, c));
        let mut kac = va.clone();
        kac.extend(vc.iter().cloned());
        let mut kbc = vb.clone();
        kbc.extend(vc.iter().cloned());
        *ac.entry(kac).or_insert_with(BigInt::zero) += &w;
        *bc.entry(kbc).or_insert_with(BigInt::zero) += &w;
        *cc.entry(vc.clone()).or_insert_with(BigInt::zero) += &w;
        a_by_c.entry(vc.clone()).or_default().insert(va.clone());
        b_by_c.entry(vc.clone()).or_default().insert(vb.clone());
        *abc.entry((va, vb, vc)).or_insert_with(BigInt::zero) += w;
    }
    let zero = BigInt::zero();
    for (vc, pc) in &cc {
        for va in &a_by_c[vc] {
            let mut kac = va.clone();
            kac.extend(vc.iter().cloned());
            let pac = &ac[&kac];
            for vb in &b_by_c[vc] {
                let mut kbc = vb.clone();
                kbc.extend(vc.iter().cloned());
                let pbc = &bc[&kbc];
                let pabc = abc
                    .get(&(va.clone(), vb.clone(), vc.clone()))
                    .unwrap_or(&zero);
                if pabc * pc != pac * pbc {
                    return Ok(false);
                }
            }
        }
    }
    Ok(true)
}

/// Cardinality caps on a witness: per shared family and for the pool of
/// unshared inputs.
#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
pub struct Bounds {
    pub per_family: usize,
    pub unshared: usize,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum SearchOutcome {
    /// Cardinality-minimal, then lexicographically least witness.
    Found(Vec<String>),
    /// No witness within the bounds. By monotonicity it suffices that every
    /// maximal candidate fails; one counterexample per maximal candidate.
    NotFound(Vec<Counterexample>),
}

/// Input positions of each share family and of the unshared pool.
pub(crate) fn input_groups(k: &Kernel) -> (Vec<Vec<usize>>, Vec<usize>) {
    let p = k.program();
    let fams = p
        .shares
        .families
        .iter()
        .map(|f| f.members.iter().filter_map(|m| k.input_position(m)).collect())
        .collect();
    let unshared = p
        .shares
        .unshared
        .iter()
        .filter_map(|u| k.input_position(u))
        .collect();
    (fams, unshared)
}

fn subsets_up_to(items: &[usize], max: usize) -> Vec<Vec<usize>> {
    let mut out = vec![Vec::new()];
    for size in 1..=max.min(items.len()) {
        out.extend(crate::probes::combinations(items.len(), size).map(|c| c.iter().map(|&i| items[i]).collect()));
    }
    out
}

/// All candidate witnesses within `bounds`, sorted by size and then
/// lexicographically by input declaration position.
pub(crate) fn candidates(k: &Kernel, bounds: Bounds) -> Vec<Vec<usize>> {
    let (fams, unshared) = input_groups(k);
    let mut acc: Vec<Vec<usize>> = vec![Vec::new()];
    let groups = fams
        .iter()
        .map(|f| (f, bounds.per_family))
        .chain(std::iter::once((&unshared, bounds.unshared)));
    for (g, cap) in groups {
        let subs = subsets_up_to(g, cap);
        let mut next = Vec::with_capacity(acc.len() * subs.len());
        for a in &acc {
            for s in &subs {
                let mut c = a.clone();
                c.extend_from_slice(s);
                next.push(c);
            }
        }
        acc = next;
    }
    for c in &mut acc {
        c.sort_unstable();
    }
    acc.sort_by(|x, y| x.len().cmp(&y.len()).then_with(|| x.cmp(y)));
    acc
}

/// Candidates that use the full allowance in every group.
fn maximal_candidates(k: &Kernel, bounds: Bounds) -> Vec<Vec<usize>> {
    let (fams, unshared) = input_groups(k);
    let mut acc: Vec<Vec<usize>> = vec![Vec::new()];
    let groups = fams
        .iter()
        .map(|f| (f, bounds.per_family))
        .chain(std::iter::once((&unshared, bounds.unshared)));
    for (g, cap) in groups {
        let size = cap.min(g.len());
        let subs: Vec<Vec<usize>> = crate::probes::combinations(g.len(), size)
            .map(|c| c.iter().map(|&i| g[i]).collect())
            .collect();
        let mut next = Vec::new();
        for a in &acc {
            for s in &subs {
                let mut c = a.clone();
                c.extend_from_slice(s);
                next.push(c);
            }
        }
        acc = next;
    }
    for c in &mut acc {
        c.sort_unstable();
    }
    acc.sort();
    acc
}

pub(crate) fn names_of(k: &Kernel, pos: &[usize]) -> Vec<String> {
    pos.iter().map(|&i| k.program().inputs[i].name.clone()).collect()
}

/// Searches for a witness I with `(I, outputs)`-NI inside `bounds`.
pub fn search_i(k: &Kernel, outputs: &[String], bounds: Bounds) -> Result<SearchOutcome, OracleError> {
    let o = k.output_positions(outputs)?;
    Ok(search_i_positions(k, &o, bounds))
}

pub fn search_i_positions(k: &Kernel, o: &[usize], bounds: Bounds) -> SearchOutcome {
    let maximal = maximal_candidates(k, bounds);
    let mut failures = Vec::new();
    for m in &maximal {
        match k.distinguishing_pair(m, o) {
            Some(pair) => failures.push(Counterexample::from_pair(k, m, o, pair)),
            None => {
                failures.clear();
                break;
            }
        }
    }
    if !failures.is_empty() {
        return SearchOutcome::NotFound(failures);
    }
    for c in candidates(k, bounds) {
        if k.distinguishing_pair(&c, o).is_none() {
            return SearchOutcome::Found(names_of(k, &c));
        }
    }
    unreachable!("a maximal candidate verified, so the search finds a witness")
}
