//! Probe-set level properties (t-NI, t-SNI, t-NIU, t-SNIU) over both engines.

use std::collections::BTreeSet;
use std::path::Path;
use std::sync::OnceLock;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::dsl::{expose_internals, FlatProgram};
use crate::oracle::{search_i_positions, Bounds, Counterexample, Kernel, OracleError, SearchOutcome};
use crate::probes::{probe_count, probe_sets, Checkpoint, CheckpointError, ProbeSet};
use crate::semantics::{Modulus, DEFAULT_CAP};
use crate::symbolic::{
    closing_steps, needed_inputs, to_symbolic, uniformize, Certificate, ProbeState, Rule, SymbolicError,
    SymbolicState, UniformizeOptions,
};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Property {
    #[serde(rename = "io-ni")]
    IoNi,
    #[serde(rename = "t-ni")]
    TNi,
    #[serde(rename = "t-sni")]
    TSni,
    #[serde(rename = "t-niu")]
    TNiu,
    #[serde(rename = "t-sniu")]
    TSniu,
}

impl Property {
    pub fn label(self) -> &'static str {
        match self {
            Property::IoNi => "io-ni",
            Property::TNi => "t-ni",
            Property::TSni => "t-sni",
            Property::TNiu => "t-niu",
            Property::TSniu => "t-sniu",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        [Property::IoNi, Property::TNi, Property::TSni, Property::TNiu, Property::TSniu]
            .into_iter()
            .find(|p| p.label() == s)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Engine {
    Oracle,
    Symbolic,
    Hybrid,
}

impl Engine {
    pub fn label(self) -> &'static str {
        match self {
            Engine::Oracle => "oracle",
            Engine::Symbolic => "symbolic",
            Engine::Hybrid => "hybrid",
        }
    }
}

/// What the unshared allowance of t-SNIU counts.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum UnsharedBound {
    #[default]
    Internal,
    All,
}

/// Witness bounds for one probe set.
pub fn bounds_for(property: Property, probes: &ProbeSet, unshared: UnsharedBound) -> Bounds {
    let all = probes.names.len();
    let int = probes.internal;
    match property {
        Property::IoNi | Property::TNi => Bounds {
            per_family: all,
            unshared: 0,
        },
        Property::TSni => Bounds {
            per_family: int,
            unshared: 0,
        },
        Property::TNiu => Bounds {
            per_family: all,
            unshared: all,
        },
        Property::TSniu => Bounds {
            per_family: int,
            unshared: match unshared {
                UnsharedBound::Internal => int,
                UnsharedBound::All => all,
            },
        },
    }
}

/// Whether `witness` respects `bounds` for the share structure of `p`.
pub fn within_bounds(p: &FlatProgram, witness: &[String], bounds: Bounds) -> bool {
    let set: BTreeSet<&str> = witness.iter().map(String::as_str).collect();
    if set.iter().any(|w| !p.is_input(w)) {
        return false;
    }
    let fams_ok = p
        .shares
        .families
        .iter()
        .all(|f| f.members.iter().filter(|m| set.contains(m.as_str())).count() <= bounds.per_family);
    let unshared = p
        .shares
        .unshared
        .iter()
        .filter(|u| set.contains(u.as_str()))
        .count();
    fams_ok && unshared <= bounds.unshared
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Status {
    Verified,
    Refuted,
    Unknown,
}

impl Status {
    pub fn exit_code(self) -> i32 {
        match self {
            Status::Verified => 0,
            Status::Refuted => 1,
            Status::Unknown => 2,
        }
    }

    pub fn label(self) -> &'static str {
        match self {
            Status::Verified => "verified",
            Status::Refuted => "refuted",
            Status::Unknown => "unknown",
        }
    }
}

/// Result for one probe set.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProbeOutcome {
    pub probes: Vec<String>,
    pub internal: usize,
    pub bounds: Bounds,
    pub status: Status,
    /// Engine that produced the status.
    pub engine: Engine,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub witness: Option<Vec<String>>,
    /// Least witness found by search, when a supplied witness was used.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub minimal_witness: Option<Vec<String>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub expected: Option<Vec<String>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub expected_holds: Option<bool>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub counterexamples: Vec<serde_json::Value>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub certificate: Option<Certificate>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub reason: Option<String>,
    /// In-memory counterexamples, for rechecking.
    #[serde(skip)]
    pub raw_counterexamples: Vec<Counterexample>,
}

impl ProbeOutcome {
    fn new(ps: &ProbeSet, bounds: Bounds, engine: Engine) -> Self {
        ProbeOutcome {
            probes: ps.names.clone(),
            internal: ps.internal,
            bounds,
            status: Status::Unknown,
            engine,
            witness: None,
            minimal_witness: None,
            expected: None,
            expected_holds: None,
            counterexamples: Vec::new(),
            certificate: None,
            reason: None,
            raw_counterexamples: Vec::new(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CheckConfig {
    pub property: Property,
    pub t: usize,
    pub q: u32,
    pub engine: Engine,
    /// Enumeration cap of the oracle (assignments times samples).
    pub cap: u64,
    /// Largest number of probe sets examined.
    pub probe_cap: u64,
    pub unshared_bound: UnsharedBound,
    pub unit_coefficients: bool,
}

impl CheckConfig {
    pub fn new(property: Property, t: usize, q: u32) -> Self {
        CheckConfig {
            property,
            t,
            q,
            engine: Engine::Hybrid,
            cap: DEFAULT_CAP,
            probe_cap: 1 << 20,
            unshared_bound: UnsharedBound::Internal,
            unit_coefficients: false,
        }
    }

    pub fn with_engine(mut self, engine: Engine) -> Self {
        self.engine = engine;
        self
    }
}

/// Hint mapping a probe set to an expected witness.
pub type Hint<'a> = &'a (dyn Fn(&[String]) -> Option<Vec<String>> + Sync);

/// A program prepared for probe-set checks. The oracle table and the
/// symbolic state are built on first use.
pub struct Checker {
    program: FlatProgram,
    q: Modulus,
    cfg: CheckConfig,
    kernel: OnceLock<Result<Kernel, OracleError>>,
    symbolic: OnceLock<Result<SymbolicState, SymbolicError>>,
}

#[derive(Debug, thiserror::Error)]
pub enum CheckError {
    #[error("modulus must be at least 2, got {0}")]
    Modulus(u32),
    #[error(transparent)]
    Checkpoint(#[from] CheckpointError),
}

impl Checker {
    pub fn new(p: &FlatProgram, cfg: CheckConfig) -> Result<Self, CheckError> {
        let q = Modulus::new(cfg.q).ok_or(CheckError::Modulus(cfg.q))?;
        Ok(Checker {
            program: expose_internals(p),
            q,
            cfg,
            kernel: OnceLock::new(),
            symbolic: OnceLock::new(),
        })
    }

    pub fn program(&self) -> &FlatProgram {
        &self.program
    }

    pub fn config(&self) -> &CheckConfig {
        &self.cfg
    }

    pub fn kernel(&self) -> Result<&Kernel, &OracleError> {
        self.kernel
            .get_or_init(|| Kernel::build(&self.program, self.q, self.cfg.cap))
            .as_ref()
    }

    pub fn symbolic_state(&self) -> Result<&SymbolicState, &SymbolicError> {
        self.symbolic
            .get_or_init(|| to_symbolic(&self.program, self.q))
            .as_ref()
    }

    fn uniformize_options(&self) -> UniformizeOptions {
        UniformizeOptions {
            unit_coefficients: self.cfg.unit_coefficients,
        }
    }

    /// Checks one probe set under the configured property and engine.
    pub fn check_probe_set(&self, ps: &ProbeSet, hint: Option<Hint<'_>>) -> ProbeOutcome {
        let bounds = bounds_for(self.cfg.property, ps, self.cfg.unshared_bound);
        let expected = hint.and_then(|h| h(&ps.names));
        match self.cfg.engine {
            Engine::Oracle => self.oracle_probe(ps, bounds, expected),
            Engine::Symbolic => self.symbolic_probe(ps, bounds, expected),
            Engine::Hybrid => {
                let s = self.symbolic_probe(ps, bounds, expected.clone());
                // Keep the symbolic result when the supplied witness was
                // established symbolically too; otherwise ask the oracle.
                if s.status == Status::Verified && (expected.is_none() || s.expected_holds == Some(true)) {
                    s
                } else {
                    let mut o = self.oracle_probe(ps, bounds, expected);
                    if o.status == Status::Unknown {
                        o.reason = Some(format!(
                            "symbolic: {}; oracle: {}",
                            s.reason.as_deref().unwrap_or("undecided"),
                            o.reason.as_deref().unwrap_or("undecided")
                        ));
                    }
                    o
                }
            }
        }
    }

    fn oracle_probe(&self, ps: &ProbeSet, bounds: Bounds, expected: Option<Vec<String>>) -> ProbeOutcome {
        let mut out = ProbeOutcome::new(ps, bounds, Engine::Oracle);
        let k = match self.kernel() {
            Ok(k) => k,
            Err(e) => {
                out.reason = Some(e.to_string());
                out.expected = expected;
                return out;
            }
        };
        match search_i_positions(k, &ps.positions, bounds) {
            SearchOutcome::Found(min) => {
                out.status = Status::Verified;
                if let Some(exp) = expected {
                    let holds = within_bounds(&self.program, &exp, bounds)
                        && k.input_positions(&exp)
                            .map(|i| k.distinguishing_pair(&i, &ps.positions).is_none())
                            .unwrap_or(false);
                    out.expected_holds = Some(holds);
                    if holds {
                        out.witness = Some(exp.clone());
                        out.minimal_witness = Some(min);
                    } else {
                        out.witness = Some(min);
                    }
                    out.expected = Some(exp);
                } else {
                    out.witness = Some(min);
                }
            }
            SearchOutcome::NotFound(cexs) => {
                out.status = Status::Refuted;
                out.counterexamples = cexs.iter().map(Counterexample::to_json).collect();
                out.raw_counterexamples = cexs;
                if let Some(exp) = expected {
                    out.expected_holds = Some(false);
                    out.expected = Some(exp);
                }
            }
        }
        out
    }

    fn symbolic_probe(&self, ps: &ProbeSet, bounds: Bounds, expected: Option<Vec<String>>) -> ProbeOutcome {
        let mut out = ProbeOutcome::new(ps, bounds, Engine::Symbolic);
        out.expected = expected.clone();
        let state = match self.symbolic_state() {
            Ok(s) => s,
            Err(e) => {
                out.reason = Some(e.to_string());
                return out;
            }
        };
        let initial = match ProbeState::new(state, &ps.names) {
            Ok(s) => s,
            Err(e) => {
                out.reason = Some(e.to_string());
                return out;
            }
        };
        let u = uniformize(&initial, self.uniformize_options());
        let needed = needed_inputs(&u.state);
        let mut cert = Certificate {
            steps: u.steps.clone(),
            missed: u.missed.clone(),
        };
        if !within_bounds(&self.program, &needed, bounds) {
            out.reason = Some(format!(
                "needed inputs {{{}}} exceed the allowance (per family {}, unshared {})",
                needed.join(", "),
                bounds.per_family,
                bounds.unshared
            ));
            out.certificate = Some(cert);
            return out;
        }
        out.status = Status::Verified;
        let chosen = match &expected {
            Some(exp) => {
                let holds =
                    within_bounds(&self.program, exp, bounds) && needed.iter().all(|n| exp.contains(n));
                out.expected_holds = Some(holds);
                if holds {
                    out.minimal_witness = Some(needed.clone());
                    Some(exp.clone())
                } else {
                    None
                }
            }
            None => None,
        };
        cert.steps
            .extend(closing_steps(&u, &needed, chosen.as_deref()));
        out.witness = Some(chosen.unwrap_or(needed));
        out.certificate = Some(cert);
        out
    }
}

/// Aggregated result of a t-level check.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TVerdict {
    pub status: Status,
    pub total_probe_sets: u128,
    pub outcomes: Vec<ProbeOutcome>,
    /// Probe sets left out by the probe cap (first few only).
    pub unchecked: Vec<Vec<String>>,
    pub unchecked_count: u128,
}

impl TVerdict {
    pub fn refuted(&self) -> impl Iterator<Item = &ProbeOutcome> {
        self.outcomes.iter().filter(|o| o.status == Status::Refuted)
    }

    pub fn count(&self, s: Status) -> usize {
        self.outcomes.iter().filter(|o| o.status == s).count()
    }
}

fn aggregate(outcomes: &[ProbeOutcome], unchecked: u128) -> Status {
    if outcomes.iter().any(|o| o.status == Status::Refuted) {
        Status::Refuted
    } else if unchecked > 0 || outcomes.iter().any(|o| o.status == Status::Unknown) {
        Status::Unknown
    } else {
        Status::Verified
    }
}

const UNCHECKED_LISTED: usize = 64;
const CHUNK: usize = 256;

/// Runs every probe set with at most `t` probes. Results are ordered by probe
/// set regardless of scheduling. With a checkpoint, finished probe sets are
/// read back and new ones appended.
pub fn check_t_level(
    checker: &Checker,
    hint: Option<Hint<'_>>,
    checkpoint: Option<(&Path, &str)>,
) -> Result<TVerdict, CheckError> {
    let outputs = &checker.program.outputs;
    let t = checker.cfg.t;
    let total = probe_count(outputs.len(), t);
    let limit = checker.cfg.probe_cap.min(usize::MAX as u64) as usize;
    let sets: Vec<ProbeSet> = probe_sets(outputs, t).take(limit).collect();
    let unchecked_count = total - sets.len() as u128;
    let unchecked = probe_sets(outputs, t)
        .skip(sets.len())
        .take(UNCHECKED_LISTED)
        .map(|p| p.names)
        .collect();

    let (mut ckpt, done) = match checkpoint {
        Some((path, fp)) => {
            let (c, recs) = Checkpoint::open::<ProbeOutcome>(path, fp)?;
            (Some(c), recs)
        }
        None => (None, Vec::new()),
    };
    let mut done = crate::probes::index_by_probes(done, |o: &ProbeOutcome| o.probes.clone());

    let mut outcomes = Vec::with_capacity(sets.len());
    for chunk in sets.chunks(CHUNK) {
        let todo: Vec<&ProbeSet> = chunk.iter().filter(|p| !done.contains_key(&p.names)).collect();
        let fresh: Vec<ProbeOutcome> = todo.par_iter().map(|p| checker.check_probe_set(p, hint)).collect();
        if let Some(c) = ckpt.as_mut() {
            for o in &fresh {
                c.append(o)?;
            }
        }
        for o in fresh {
            done.insert(o.probes.clone(), o);
        }
        for p in chunk {
            outcomes.push(done.remove(&p.names).expect("every probe set has an outcome"));
        }
    }
    Ok(TVerdict {
        status: aggregate(&outcomes, unchecked_count),
        total_probe_sets: total,
        outcomes,
        unchecked,
        unchecked_count,
    })
}

/// Result of a single (I, O) query.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct IoOutcome {
    pub inputs: Vec<String>,
    pub probes: Vec<String>,
    pub status: Status,
    pub engine: Engine,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub counterexample: Option<serde_json::Value>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub certificate: Option<Certificate>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub reason: Option<String>,
    #[serde(skip)]
    pub raw_counterexample: Option<Counterexample>,
}

#[derive(Debug, thiserror::Error)]
pub enum QueryError {
    #[error("unknown input `{0}`")]
    UnknownInput(String),
    #[error("unknown output `{0}`")]
    UnknownOutput(String),
}

/// Decides (I, O)-NI for one pair with the configured engine.
pub fn check_io(checker: &Checker, inputs: &[String], probes: &[String]) -> Result<IoOutcome, QueryError> {
    let p = &checker.program;
    if let Some(i) = inputs.iter().find(|i| !p.is_input(i)) {
        return Err(QueryError::UnknownInput(i.clone()));
    }
    if let Some(o) = probes.iter().find(|o| !p.outputs.iter().any(|s| &s.name == *o)) {
        return Err(QueryError::UnknownOutput(o.clone()));
    }
    let mut out = IoOutcome {
        inputs: inputs.to_vec(),
        probes: probes.to_vec(),
        status: Status::Unknown,
        engine: Engine::Symbolic,
        counterexample: None,
        certificate: None,
        reason: None,
        raw_counterexample: None,
    };
    if checker.cfg.engine != Engine::Oracle {
        match checker.symbolic_state() {
            Ok(state) => match crate::symbolic::verify_io_ni_symbolic(state, inputs, probes, checker.uniformize_options()) {
                Ok(v) => {
                    out.certificate = Some(v.certificate);
                    if v.status == crate::symbolic::SymbolicStatus::Verified {
                        out.status = Status::Verified;
                        return Ok(out);
                    }
                    out.reason = Some(format!("symbolic engine needs {{{}}}", v.needed.join(", ")));
                }
                Err(e) => out.reason = Some(e.to_string()),
            },
            Err(e) => out.reason = Some(e.to_string()),
        }
        if checker.cfg.engine == Engine::Symbolic {
            return Ok(out);
        }
    }
    out.engine = Engine::Oracle;
    out.certificate = None;
    match checker.kernel() {
        Ok(k) => {
            let i = k.input_positions(inputs).expect("inputs validated");
            let o = k.output_positions(probes).expect("outputs validated");
            match crate::oracle::check_io_ni_positions(k, &i, &o) {
                crate::oracle::IoVerdict::Verified => {
                    out.status = Status::Verified;
                    out.reason = None;
                }
                crate::oracle::IoVerdict::Refuted(c) => {
                    out.status = Status::Refuted;
                    out.reason = None;
                    out.counterexample = Some(c.to_json());
                    out.raw_counterexample = Some(*c);
                }
            }
        }
        Err(e) => out.reason = Some(e.to_string()),
    }
    Ok(out)
}

/// Rules recorded in a certificate, first occurrence order.
pub fn rules_used(cert: &Certificate) -> Vec<Rule> {
    let mut out = Vec::new();
    for s in &cert.steps {
        if !out.contains(&s.rule) {
            out.push(s.rule);
        }
    }
    out
}

/// Runs `f` on a pool of `jobs` worker threads; `0` means the rayon default.
pub fn with_jobs<R: Send>(jobs: usize, f: impl FnOnce() -> R + Send) -> R {
    match rayon::ThreadPoolBuilder::new().num_threads(jobs).build() {
        Ok(pool) => pool.install(f),
        Err(_) => f(),
    }
}
