//! Uniform-bijection rewriting of probe tuples, and the certificates it emits.

use std::collections::BTreeSet;

use num_integer::Integer;
use serde::{Deserialize, Serialize};

use super::form::*;
use super::state::{render_value, SymbolicState};
use super::SymbolicError;
use crate::semantics::Modulus;

/// Rule labels as they appear in certificates.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum Rule {
    #[serde(rename = "Unif-Bijection")]
    UnifBijection,
    #[serde(rename = "Gen-Weak-Union")]
    GenWeakUnion,
    #[serde(rename = "Monotonicity")]
    Monotonicity,
    #[serde(rename = "Seq-Compose")]
    SeqCompose,
    #[serde(rename = "Loop-Compose")]
    LoopCompose,
    #[serde(rename = "Weakening")]
    Weakening,
    #[serde(rename = "Transfer-Own")]
    TransferOwn,
}

impl Rule {
    pub const ALL: [Rule; 7] = [
        Rule::UnifBijection,
        Rule::GenWeakUnion,
        Rule::Monotonicity,
        Rule::SeqCompose,
        Rule::LoopCompose,
        Rule::Weakening,
        Rule::TransferOwn,
    ];

    pub fn label(self) -> &'static str {
        match self {
            Rule::UnifBijection => "Unif-Bijection",
            Rule::GenWeakUnion => "Gen-Weak-Union",
            Rule::Monotonicity => "Monotonicity",
            Rule::SeqCompose => "Seq-Compose",
            Rule::LoopCompose => "Loop-Compose",
            Rule::Weakening => "Weakening",
            Rule::TransferOwn => "Transfer-Own",
        }
    }
}

/// Location and data of one bijection rewrite.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Rewrite {
    pub probe: usize,
    pub component: usize,
    pub atom: Atom,
    pub coefficient: u32,
    pub fresh: usize,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RuleStep {
    pub rule: Rule,
    pub touched: Vec<String>,
    pub before: String,
    pub after: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub rewrite: Option<Rewrite>,
}

/// A uniform atom that occurs in a single probe but could not be used.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Missed {
    pub probe: String,
    pub atom: String,
    pub reason: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct Certificate {
    pub steps: Vec<RuleStep>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub missed: Vec<Missed>,
}

impl Certificate {
    pub fn rules(&self) -> Vec<Rule> {
        self.steps.iter().map(|s| s.rule).collect()
    }

    pub fn extend(&mut self, other: Certificate) {
        self.steps.extend(other.steps);
        self.missed.extend(other.missed);
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct UniformizeOptions {
    /// Accept any coefficient invertible mod q, not just ±1.
    pub unit_coefficients: bool,
}

/// Normal forms of a probe tuple, one list of scalar components per probe.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ProbeState {
    pub q: Modulus,
    pub probes: Vec<String>,
    pub exprs: Vec<Vec<SymValue>>,
    pub next_fresh: usize,
    input_names: Vec<String>,
    uniform_names: Vec<String>,
}

impl ProbeState {
    pub fn new(state: &SymbolicState, probes: &[String]) -> Result<Self, SymbolicError> {
        let exprs = probes
            .iter()
            .map(|p| {
                state
                    .get(p)
                    .map(SymValue::components)
                    .ok_or_else(|| SymbolicError::UnknownVariable(p.clone()))
            })
            .collect::<Result<_, _>>()?;
        Ok(ProbeState {
            q: state.q,
            probes: probes.to_vec(),
            exprs,
            next_fresh: 0,
            input_names: state.input_names.clone(),
            uniform_names: state.uniform_names.clone(),
        })
    }

    pub fn atom_name(&self, a: Atom) -> String {
        match a {
            Atom::Input(i) => self.input_names[i].clone(),
            Atom::Uniform(k) => self.uniform_names[k].clone(),
            Atom::Fresh(k) => format!("$u{k}"),
        }
    }

    pub fn render_probe(&self, i: usize) -> String {
        let parts: Vec<String> = self.exprs[i]
            .iter()
            .map(|v| render_value(v, &|a| self.atom_name(a), self.q))
            .collect();
        if parts.len() == 1 {
            parts.into_iter().next().expect("one part")
        } else {
            format!("({})", parts.join(", "))
        }
    }

    fn components(&self) -> impl Iterator<Item = ((usize, usize), &SymValue)> {
        self.exprs
            .iter()
            .enumerate()
            .flat_map(|(i, cs)| cs.iter().enumerate().map(move |(j, v)| ((i, j), v)))
    }

    /// Inputs occurring anywhere in the probe tuple, by declaration position.
    pub fn input_atoms(&self) -> BTreeSet<usize> {
        let mut atoms = BTreeSet::new();
        for (_, v) in self.components() {
            v.atoms_into(&mut atoms);
        }
        atoms
            .into_iter()
            .filter_map(|a| match a {
                Atom::Input(i) => Some(i),
                _ => None,
            })
            .collect()
    }

    pub fn input_name(&self, i: usize) -> &str {
        &self.input_names[i]
    }
}

fn is_unit(c: u32, q: Modulus, opts: UniformizeOptions) -> bool {
    c == 1 || c == q.get() - 1 || (opts.unit_coefficients && (c as u64).gcd(&(q.get() as u64)) == 1)
}

/// Whether `atom` occurs anywhere except the linear part of component `at`.
fn occurs_elsewhere(ps: &ProbeState, at: (usize, usize), atom: Atom) -> bool {
    for (loc, v) in ps.components() {
        let mut set = BTreeSet::new();
        if loc == at {
            if let SymValue::Ring(f) = v {
                f.opaque_atoms_into(&mut set);
            }
        } else {
            v.atoms_into(&mut set);
        }
        if set.contains(&atom) {
            return true;
        }
    }
    false
}

fn find_rewrite(ps: &ProbeState, opts: UniformizeOptions) -> Option<((usize, usize), Atom, u32)> {
    for (loc, v) in ps.components() {
        let SymValue::Ring(f) = v else { continue };
        if matches!(f.as_bare_atom(), Some(a) if a.is_uniform()) {
            continue;
        }
        for (m, &c) in &f.terms {
            let Monomial::Atom(a) = m else { continue };
            if a.is_uniform() && is_unit(c, ps.q, opts) && !occurs_elsewhere(ps, loc, *a) {
                return Some((loc, *a, c));
            }
        }
    }
    None
}

fn apply(ps: &mut ProbeState, (i, j): (usize, usize), atom: Atom, coefficient: u32) -> RuleStep {
    let before = ps.render_probe(i);
    let fresh = ps.next_fresh;
    ps.next_fresh += 1;
    ps.exprs[i][j] = SymValue::Ring(LinearForm::atom(Atom::Fresh(fresh)));
    RuleStep {
        rule: Rule::UnifBijection,
        touched: vec![ps.probes[i].clone(), ps.atom_name(atom)],
        before,
        after: ps.render_probe(i),
        rewrite: Some(Rewrite {
            probe: i,
            component: j,
            atom,
            coefficient,
            fresh,
        }),
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Uniformized {
    pub state: ProbeState,
    pub steps: Vec<RuleStep>,
    pub missed: Vec<Missed>,
}

/// Rewrites probes to fresh uniforms until no rewrite applies. A probe is
/// replaced when it has a uniform atom with unit coefficient in its linear
/// part that occurs nowhere else in the tuple; the probe is then a bijective
/// image of that atom with everything else fixed.
pub fn uniformize(initial: &ProbeState, opts: UniformizeOptions) -> Uniformized {
    let mut ps = initial.clone();
    let mut steps = Vec::new();
    while let Some((loc, atom, c)) = find_rewrite(&ps, opts) {
        steps.push(apply(&mut ps, loc, atom, c));
    }
    let missed = missed_opportunities(&ps, opts);
    Uniformized {
        state: ps,
        steps,
        missed,
    }
}

fn missed_opportunities(ps: &ProbeState, opts: UniformizeOptions) -> Vec<Missed> {
    let mut out = Vec::new();
    for (loc, v) in ps.components() {
        let mut atoms = BTreeSet::new();
        v.atoms_into(&mut atoms);
        if let SymValue::Ring(f) = v {
            if matches!(f.as_bare_atom(), Some(a) if a.is_uniform()) {
                continue;
            }
        }
        for a in atoms.into_iter().filter(|a| a.is_uniform()) {
            let alone = ps.components().all(|(l, w)| l == loc || !w.atoms().contains(&a));
            if !alone {
                continue;
            }
            let linear = match v {
                SymValue::Ring(f) => f.coeff(a),
                _ => 0,
            };
            let mut inner = BTreeSet::new();
            if let SymValue::Ring(f) = v {
                f.opaque_atoms_into(&mut inner);
            }
            let reason = if linear == 0 || inner.contains(&a) || !matches!(v, SymValue::Ring(_)) {
                "occurs inside a non-linear subterm".to_string()
            } else if (linear as u64).gcd(&(ps.q.get() as u64)) == 1 && !opts.unit_coefficients {
                format!("coefficient {linear} is invertible but not ±1; enable unit coefficients")
            } else {
                format!("coefficient {linear} is not invertible mod {}", ps.q.get())
            };
            out.push(Missed {
                probe: ps.probes[loc.0].clone(),
                atom: ps.atom_name(a),
                reason,
            });
        }
    }
    out
}

/// Re-applies the bijection steps of a certificate to `initial`, checking
/// each side condition again.
pub fn replay(initial: &ProbeState, steps: &[RuleStep], opts: UniformizeOptions) -> Result<ProbeState, SymbolicError> {
    let mut ps = initial.clone();
    for (n, s) in steps.iter().enumerate() {
        let Some(rw) = &s.rewrite else { continue };
        let bad = |why: &str| SymbolicError::Replay {
            step: n,
            msg: why.to_string(),
        };
        let v = ps
            .exprs
            .get(rw.probe)
            .and_then(|cs| cs.get(rw.component))
            .ok_or_else(|| bad("no such probe component"))?;
        let SymValue::Ring(f) = v else {
            return Err(bad("component is not a ring value"));
        };
        let c = f.coeff(rw.atom);
        if c != rw.coefficient || !rw.atom.is_uniform() || !is_unit(c, ps.q, opts) {
            return Err(bad("coefficient side condition fails"));
        }
        if occurs_elsewhere(&ps, (rw.probe, rw.component), rw.atom) {
            return Err(bad("atom occurs elsewhere"));
        }
        if rw.fresh != ps.next_fresh {
            return Err(bad("fresh atoms out of order"));
        }
        apply(&mut ps, (rw.probe, rw.component), rw.atom, c);
    }
    Ok(ps)
}

/// Inputs the rewritten probes still depend on, as names in declaration order.
pub fn needed_inputs(ps: &ProbeState) -> Vec<String> {
    ps.input_atoms()
        .into_iter()
        .map(|i| ps.input_name(i).to_string())
        .collect()
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum SymbolicStatus {
    Verified,
    Unknown,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SymbolicVerdict {
    pub status: SymbolicStatus,
    pub needed: Vec<String>,
    pub certificate: Certificate,
    pub final_state: ProbeState,
}

/// Certificate steps that conclude `(needed, O)`-NI from a uniformized state,
/// and widen it to `inputs` when that is a superset.
pub(crate) fn closing_steps(u: &Uniformized, needed: &[String], inputs: Option<&[String]>) -> Vec<RuleStep> {
    let ps = &u.state;
    let mut steps = Vec::new();
    let rewritten: BTreeSet<usize> = u
        .steps
        .iter()
        .filter_map(|s| s.rewrite.as_ref().map(|r| r.probe))
        .collect();
    steps.push(RuleStep {
        rule: Rule::GenWeakUnion,
        touched: needed.to_vec(),
        before: format!("own {{{}}}", ps.probes.join(", ")),
        after: format!("conditioned on {{{}}}", needed.join(", ")),
        rewrite: None,
    });
    let determined: Vec<String> = (0..ps.probes.len())
        .filter(|i| !rewritten.contains(i))
        .map(|i| ps.probes[i].clone())
        .collect();
    if !determined.is_empty() {
        steps.push(RuleStep {
            rule: Rule::TransferOwn,
            touched: determined.clone(),
            before: determined
                .iter()
                .map(|p| {
                    let i = ps.probes.iter().position(|x| x == p).expect("probe");
                    format!("{p} = {}", ps.render_probe(i))
                })
                .collect::<Vec<_>>()
                .join("; "),
            after: format!("function of {{{}}} and independent uniforms", needed.join(", ")),
            rewrite: None,
        });
    }
    if let Some(inputs) = inputs {
        let extra: Vec<String> = inputs.iter().filter(|i| !needed.contains(i)).cloned().collect();
        if !extra.is_empty() {
            steps.push(RuleStep {
                rule: Rule::Monotonicity,
                touched: extra,
                before: format!("({{{}}}, O)-NI", needed.join(", ")),
                after: format!("({{{}}}, O)-NI", inputs.join(", ")),
                rewrite: None,
            });
        }
    }
    steps
}

/// Proves `(inputs, probes)`-NI when the needed inputs after uniformization
/// are among `inputs`; otherwise reports unknown. Never refutes.
pub fn verify_io_ni_symbolic(
    state: &SymbolicState,
    inputs: &[String],
    probes: &[String],
    opts: UniformizeOptions,
) -> Result<SymbolicVerdict, SymbolicError> {
    let initial = ProbeState::new(state, probes)?;
    let u = uniformize(&initial, opts);
    let needed = needed_inputs(&u.state);
    let ok = needed.iter().all(|n| inputs.contains(n));
    let mut certificate = Certificate {
        steps: u.steps.clone(),
        missed: u.missed.clone(),
    };
    if ok {
        certificate.steps.extend(closing_steps(&u, &needed, Some(inputs)));
    }
    Ok(SymbolicVerdict {
        status: if ok {
            SymbolicStatus::Verified
        } else {
            SymbolicStatus::Unknown
        },
        needed,
        certificate,
        final_state: u.state,
    })
}
