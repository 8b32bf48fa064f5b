//! Bundled gadgets, their expected properties and closed-form witnesses.

use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::sync::Mutex;

use serde::Serialize;
use thiserror::Error;

use crate::check::{check_io, check_t_level, within_bounds, CheckConfig, Checker, Engine, Property, Status};
use crate::dsl::{load_gadget, DslError, FlatProgram, Overrides, ORDER_OVERRIDE};
use crate::probes::enumerate_probes;
use crate::symbolic::{
    compose_loop, compose_sequential, weaken, wiring_by_name, ComposeError, Iteration, NiSummary,
};

/// Closed-form witness families from the case studies.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum Formula {
    /// Each probed output share needs the two input shares it sums.
    MaskedAdd,
    /// `{A[i] | R[i][j] probed, or C[i][j] probed with j < t}`.
    Refresh,
    /// `{V[j], rho[j] | X[j] probed}`.
    Marn,
    /// Index closure over probed products, randoms and partial sums.
    SecMult,
    /// Backward recursion through the refresh and noise stages.
    AddRepNoiseEr,
    /// Nothing is needed.
    Empty,
}

/// How a witness is compared with its formula.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Relation {
    /// The formula set is itself a witness and is reported as such.
    Exact,
    /// The least witness is contained in the formula set.
    Subset,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum Expectation {
    Holds { property: Property, t: usize },
    Refuted { property: Property, t: usize },
    IoHolds { inputs: Vec<String>, probes: Vec<String> },
}

#[derive(Debug, Clone, Serialize)]
pub struct CorpusEntry {
    pub name: &'static str,
    pub file: &'static str,
    #[serde(skip)]
    pub source: &'static str,
    pub expectation: Expectation,
    pub formula: Option<Formula>,
    pub relation: Relation,
    /// Modulus used by the corpus run.
    pub q: u32,
}

macro_rules! gadget {
    ($file:literal) => {
        include_str!(concat!("../corpus/", $file))
    };
}

pub fn entries() -> Vec<CorpusEntry> {
    use Expectation::*;
    vec![
        CorpusEntry {
            name: "masked_add",
            file: "masked_add.gdl",
            source: gadget!("masked_add.gdl"),
            expectation: Holds {
                property: Property::TNi,
                t: 1,
            },
            formula: Some(Formula::MaskedAdd),
            relation: Relation::Exact,
            q: 2,
        },
        CorpusEntry {
            name: "otp",
            file: "otp.gdl",
            source: gadget!("otp.gdl"),
            expectation: IoHolds {
                inputs: Vec::new(),
                probes: vec!["C".into()],
            },
            formula: Some(Formula::Empty),
            relation: Relation::Exact,
            q: 2,
        },
        CorpusEntry {
            name: "mini_add_rep_noise",
            file: "mini_add_rep_noise.gdl",
            source: gadget!("mini_add_rep_noise.gdl"),
            expectation: Holds {
                property: Property::TNiu,
                t: 2,
            },
            formula: Some(Formula::Marn),
            relation: Relation::Exact,
            q: 2,
        },
        CorpusEntry {
            name: "refresh",
            file: "refresh.gdl",
            source: gadget!("refresh.gdl"),
            expectation: Holds {
                property: Property::TSni,
                t: 2,
            },
            formula: Some(Formula::Refresh),
            relation: Relation::Exact,
            q: 2,
        },
        CorpusEntry {
            name: "sec_mult",
            file: "sec_mult.gdl",
            source: gadget!("sec_mult.gdl"),
            expectation: Holds {
                property: Property::TSni,
                t: 1,
            },
            formula: Some(Formula::SecMult),
            relation: Relation::Subset,
            q: 2,
        },
        CorpusEntry {
            name: "add_rep_noise_er",
            file: "add_rep_noise_er.gdl",
            source: gadget!("add_rep_noise_er.gdl"),
            expectation: Holds {
                property: Property::TSniu,
                t: 1,
            },
            formula: Some(Formula::AddRepNoiseEr),
            relation: Relation::Exact,
            q: 2,
        },
        CorpusEntry {
            name: "broken_refresh",
            file: "broken_refresh.gdl",
            source: gadget!("broken_refresh.gdl"),
            expectation: Refuted {
                property: Property::TSni,
                t: 1,
            },
            formula: None,
            relation: Relation::Exact,
            q: 2,
        },
        CorpusEntry {
            name: "broken_sec_mult",
            file: "broken_sec_mult.gdl",
            source: gadget!("broken_sec_mult.gdl"),
            expectation: Refuted {
                property: Property::TSni,
                t: 1,
            },
            formula: None,
            relation: Relation::Exact,
            q: 2,
        },
    ]
}

pub fn entry(name: &str) -> Option<CorpusEntry> {
    entries().into_iter().find(|e| e.name == name || e.file == name)
}

impl CorpusEntry {
    /// The configured order of the entry's check.
    pub fn t(&self) -> usize {
        match &self.expectation {
            Expectation::Holds { t, .. } | Expectation::Refuted { t, .. } => *t,
            Expectation::IoHolds { .. } => 0,
        }
    }

    /// Loads the gadget with its order set to `t`.
    pub fn load(&self, t: Option<usize>) -> Result<FlatProgram, DslError> {
        let mut ov = Overrides::new();
        if let Some(t) = t {
            ov.insert(ORDER_OVERRIDE.into(), t as i64);
        }
        load_gadget(self.source, &ov)
    }
}

/// Splits `C[0][1]` into `("C", [0, 1])`.
pub fn split_name(name: &str) -> Option<(&str, Vec<i64>)> {
    let (base, rest) = match name.find('[') {
        Some(i) => (&name[..i], &name[i..]),
        None => return Some((name, Vec::new())),
    };
    let mut idx = Vec::new();
    let mut s = rest;
    while !s.is_empty() {
        let inner = s.strip_prefix('[')?;
        let close = inner.find(']')?;
        idx.push(inner[..close].parse().ok()?);
        s = &inner[close + 1..];
    }
    Some((base, idx))
}

fn parsed(probes: &[String]) -> Vec<(&str, Vec<i64>)> {
    probes.iter().filter_map(|p| split_name(p)).collect()
}

/// Orders names by input declaration position.
fn in_decl_order(p: &FlatProgram, names: BTreeSet<String>) -> Vec<String> {
    let mut v: Vec<String> = names.into_iter().collect();
    v.sort_by_key(|n| p.inputs.iter().position(|i| &i.name == n).unwrap_or(usize::MAX));
    v
}

fn idx(base: &str, ix: &[i64]) -> String {
    let mut s = base.to_string();
    for i in ix {
        s.push_str(&format!("[{i}]"));
    }
    s
}

/// `I_Refresh` on local names, as share indices.
pub fn refresh_indices(probes: &[String], t: i64) -> BTreeSet<i64> {
    let mut out = BTreeSet::new();
    for (base, ix) in parsed(probes) {
        match (base, ix.as_slice()) {
            ("R", [i, _]) => {
                out.insert(*i);
            }
            ("C", [i, j]) if *j < t => {
                out.insert(*i);
            }
            _ => {}
        }
    }
    out
}

/// Share indices `j` with `X[j]` probed.
pub fn marn_indices(probes: &[String]) -> BTreeSet<i64> {
    parsed(probes)
        .into_iter()
        .filter_map(|(b, ix)| match (b, ix.as_slice()) {
            ("X", [j]) => Some(*j),
            _ => None,
        })
        .collect()
}

/// Index closure `(I', J')` of `(I, J)` under the pairs `k`.
pub fn add_closure(i: &BTreeSet<i64>, j: &BTreeSet<i64>, k: &BTreeSet<(i64, i64)>) -> (BTreeSet<i64>, BTreeSet<i64>) {
    let mut ni = i.clone();
    let mut nj = j.clone();
    for &(a, b) in k {
        ni.insert(if i.contains(&a) { b } else { a });
        nj.insert(if j.contains(&b) { a } else { b });
    }
    (ni, nj)
}

/// Index sets `(I, J)` for the multiplication gadget.
pub fn sec_mult_indices(probes: &[String], t: i64) -> (BTreeSet<i64>, BTreeSet<i64>) {
    let ps = parsed(probes);
    let mut i1 = BTreeSet::new();
    let mut j1 = BTreeSet::new();
    let mut k2 = BTreeSet::new();
    let mut k3 = BTreeSet::new();
    for (base, ix) in &ps {
        match (*base, ix.as_slice()) {
            ("P", [i, j]) => {
                i1.insert(*i);
                j1.insert(*j);
            }
            ("C", [i, j]) if *j < t => {
                i1.insert(*i);
                j1.insert(*i);
            }
            ("Q", [i, j]) | ("R", [i, j]) => {
                k2.insert((*i, *j));
            }
            ("S", [i, j]) => {
                k3.insert((*i, *j));
            }
            _ => {}
        }
    }
    let (i2, j2) = add_closure(&i1, &j1, &k2);
    add_closure(&i2, &j2, &k3)
}

/// Shape of an add-rep-noise gadget: lanes, repetitions and order.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ArnerShape {
    pub lanes: (i64, i64),
    pub reps: i64,
    pub t: i64,
}

pub fn arner_shape(p: &FlatProgram) -> Option<ArnerShape> {
    let mut lanes = BTreeSet::new();
    let mut reps = 0;
    for i in &p.inputs {
        match split_name(&i.name)? {
            ("V", ix) if ix.len() == 2 => {
                lanes.insert(ix[0]);
            }
            ("rho", ix) if ix.len() == 3 => reps = reps.max(ix[1]),
            _ => return None,
        }
    }
    Some(ArnerShape {
        lanes: (*lanes.first()?, *lanes.last()?),
        reps,
        t: p.order() as i64,
    })
}

/// Local refresh name of a composite variable of stage `(lane, rep)`.
fn refresh_local(name: &str, lane: i64, rep: i64) -> Option<String> {
    match split_name(name)? {
        ("R", ix) if ix.len() == 4 && ix[0] == lane && ix[1] == rep => Some(idx("R", &ix[2..])),
        ("C", ix) if ix.len() == 4 && ix[0] == lane && ix[1] == rep => Some(idx("C", &ix[2..])),
        _ => None,
    }
}

fn marn_local(name: &str, lane: i64, rep: i64) -> Option<String> {
    match split_name(name)? {
        ("Y", ix) if ix.len() == 3 && ix[0] == lane && ix[1] == rep => Some(idx("X", &ix[2..])),
        _ => None,
    }
}

/// The witness of the add-rep-noise composition theorem, computed by its
/// backward recursion over repetitions.
pub fn arner_formula(p: &FlatProgram, probes: &[String]) -> Option<Vec<String>> {
    let sh = arner_shape(p)?;
    let mut out = BTreeSet::new();
    for lane in sh.lanes.0..=sh.lanes.1 {
        let mut shared_next: BTreeSet<i64> = BTreeSet::new();
        for rep in (1..=sh.reps).rev() {
            let mut local: Vec<String> = shared_next.iter().map(|k| idx("C", &[*k, sh.t])).collect();
            local.extend(probes.iter().filter_map(|n| refresh_local(n, lane, rep)));
            let j = refresh_indices(&local, sh.t);
            let mut marn: Vec<String> = j.iter().map(|k| idx("X", &[*k])).collect();
            marn.extend(probes.iter().filter_map(|n| marn_local(n, lane, rep)));
            let ks = marn_indices(&marn);
            for k in &ks {
                out.insert(idx("rho", &[lane, rep, *k]));
            }
            shared_next = ks;
        }
        for k in shared_next {
            out.insert(idx("V", &[lane, k]));
        }
    }
    Some(in_decl_order(p, out))
}

impl Formula {
    /// Expected witness for `probes` of the exposed `p`.
    pub fn expected(self, p: &FlatProgram, probes: &[String]) -> Option<Vec<String>> {
        let t = p.order() as i64;
        let names: BTreeSet<String> = match self {
            Formula::Empty => BTreeSet::new(),
            Formula::MaskedAdd => parsed(probes)
                .into_iter()
                .filter_map(|(b, ix)| match (b, ix.as_slice()) {
                    ("C", [i]) => Some([idx("A", &[*i]), idx("B", &[*i])]),
                    _ => None,
                })
                .flatten()
                .collect(),
            Formula::Refresh => refresh_indices(probes, t).into_iter().map(|i| idx("A", &[i])).collect(),
            Formula::Marn => marn_indices(probes)
                .into_iter()
                .flat_map(|j| [idx("V", &[j]), idx("rho", &[j])])
                .collect(),
            Formula::SecMult => {
                let (i, j) = sec_mult_indices(probes, t);
                i.into_iter()
                    .map(|i| idx("A", &[i]))
                    .chain(j.into_iter().map(|j| idx("B", &[j])))
                    .collect()
            }
            Formula::AddRepNoiseEr => return arner_formula(p, probes),
        };
        Some(in_decl_order(p, names))
    }
}

#[derive(Debug, Error)]
pub enum CompositionError {
    #[error("gadget does not have the add-rep-noise shape")]
    Shape,
    #[error("probe `{0}` belongs to no stage")]
    Unassigned(String),
    #[error("stage summary ({stage}) for probes {{{probes}}} did not verify: {reason}")]
    Stage {
        stage: String,
        probes: String,
        reason: String,
    },
    #[error(transparent)]
    Compose(#[from] ComposeError),
    #[error(transparent)]
    Dsl(#[from] DslError),
}

/// Proved stage summaries for the refresh and noise components, on their
/// own names, cached by probe set.
pub struct StageSummaries {
    refresh: Checker,
    marn: Checker,
    cache: Mutex<HashMap<(bool, Vec<String>), NiSummary>>,
}

impl StageSummaries {
    pub fn new(t: usize, q: u32, engine: Engine) -> Result<Self, CompositionError> {
        let load = |name| -> Result<Checker, CompositionError> {
            let e = entry(name).expect("bundled gadget");
            let p = e.load(Some(t))?;
            let cfg = CheckConfig::new(Property::IoNi, t, q).with_engine(engine);
            Ok(Checker::new(&p, cfg).expect("modulus validated by caller"))
        };
        Ok(StageSummaries {
            refresh: load("refresh")?,
            marn: load("mini_add_rep_noise")?,
            cache: Mutex::new(HashMap::new()),
        })
    }

    fn summary(&self, refresh: bool, probes: Vec<String>) -> Result<NiSummary, CompositionError> {
        let key = (refresh, probes.clone());
        if let Some(s) = self.cache.lock().expect("cache lock").get(&key) {
            return Ok(s.clone());
        }
        let (checker, formula, stage) = if refresh {
            (&self.refresh, Formula::Refresh, "refresh")
        } else {
            (&self.marn, Formula::Marn, "mini_add_rep_noise")
        };
        let inputs = formula.expected(checker.program(), &probes).expect("formula applies");
        let io = check_io(checker, &inputs, &probes).map_err(|e| CompositionError::Stage {
            stage: stage.into(),
            probes: probes.join(", "),
            reason: e.to_string(),
        })?;
        if io.status != Status::Verified {
            return Err(CompositionError::Stage {
                stage: stage.into(),
                probes: probes.join(", "),
                reason: io.reason.unwrap_or_else(|| io.status.label().into()),
            });
        }
        let s = NiSummary::new(stage, inputs, probes, io.certificate.unwrap_or_default());
        self.cache.lock().expect("cache lock").insert(key, s.clone());
        Ok(s)
    }
}

/// Composed witness for one probe set of an add-rep-noise gadget.
#[derive(Debug, Clone, Serialize)]
pub struct Composed {
    pub probes: Vec<String>,
    pub witness: Vec<String>,
    pub summary: NiSummary,
}


/// Derives `(I, O)`-NI for the composite from stage summaries: each lane is
/// a loop over repetitions, each repetition is noise addition followed by a
/// refresh.
pub fn compose_arner(
    p: &FlatProgram,
    probes: &[String],
    stages: &StageSummaries,
) -> Result<Composed, CompositionError> {
    let sh = arner_shape(p).ok_or(CompositionError::Shape)?;
    let t = sh.t;
    let context: BTreeSet<String> = p.inputs.iter().map(|i| i.name.clone()).collect();
    for n in probes {
        let owned = (sh.lanes.0..=sh.lanes.1).any(|l| {
            (1..=sh.reps).any(|r| refresh_local(n, l, r).is_some() || marn_local(n, l, r).is_some())
        });
        if !owned {
            return Err(CompositionError::Unassigned(n.clone()));
        }
    }
    let mut total = NiSummary::identity("add_rep_noise_er");
    for lane in sh.lanes.0..=sh.lanes.1 {
        // Backward pass: probes each stage must answer for.
        let mut needed_wires: BTreeSet<String> = BTreeSet::new();
        let mut per_rep: Vec<NiSummary> = Vec::new();
        for rep in (1..=sh.reps).rev() {
            let share_in = |k: i64| {
                if rep == 1 {
                    idx("V", &[lane, k])
                } else {
                    idx("C", &[lane, rep - 1, k, t])
                }
            };
            let mut r_map = BTreeMap::new();
            let mut r_local = Vec::new();
            for n in probes.iter().chain(needed_wires.iter()) {
                if let Some(l) = refresh_local(n, lane, rep) {
                    if !r_local.contains(&l) {
                        r_map.insert(l.clone(), n.clone());
                        r_local.push(l);
                    }
                }
            }
            r_local.sort();
            for k in 0..=t {
                r_map.insert(idx("A", &[k]), idx("Y", &[lane, rep, k]));
            }
            let ref_sum = stages.summary(true, r_local)?.rename(&r_map);

            let mut m_local: BTreeSet<String> = BTreeSet::new();
            let mut m_map = BTreeMap::new();
            for k in 0..=t {
                let y = idx("Y", &[lane, rep, k]);
                m_map.insert(idx("X", &[k]), y.clone());
                m_map.insert(idx("V", &[k]), share_in(k));
                m_map.insert(idx("rho", &[k]), idx("rho", &[lane, rep, k]));
                if probes.contains(&y) || ref_sum.inputs.contains(&y) {
                    m_local.insert(idx("X", &[k]));
                }
            }
            let marn_sum = stages
                .summary(false, m_local.into_iter().collect())?
                .rename(&m_map);
            let produced: BTreeSet<String> = (0..=t).map(|k| idx("Y", &[lane, rep, k])).collect();
            let wiring = wiring_by_name(ref_sum.inputs.iter(), &produced);
            let step = compose_sequential(&marn_sum, &ref_sum, &wiring)?;
            needed_wires = step
                .inputs
                .iter()
                .filter(|n| !context.contains(*n))
                .cloned()
                .collect();
            per_rep.push(step);
        }
        per_rep.reverse();
        let iterations: Vec<Iteration> = per_rep
            .into_iter()
            .enumerate()
            .map(|(k, s)| {
                let rep = k as i64 + 1;
                let prev: BTreeSet<String> = if rep == 1 {
                    BTreeSet::new()
                } else {
                    (0..=t)
                        .flat_map(|a| (0..=t).map(move |b| idx("C", &[lane, rep - 1, a, b])))
                        .collect()
                };
                let wiring = wiring_by_name(s.inputs.iter(), &prev);
                let init_vars = if rep == 1 {
                    s.inputs
                        .iter()
                        .filter(|n| n.starts_with("V["))
                        .cloned()
                        .collect()
                } else {
                    Vec::new()
                };
                Iteration {
                    summary: s,
                    wiring,
                    init_vars,
                }
            })
            .collect();
        let lane_sum = compose_loop(&format!("lane {lane}"), &iterations, &context)?;
        let lane_sum = weaken(&lane_sum, &BTreeSet::new());
        let wiring = wiring_by_name(lane_sum.inputs.iter(), &BTreeSet::new());
        total = compose_sequential(&total, &lane_sum, &wiring)?;
    }
    let witness = in_decl_order(p, total.inputs.clone());
    Ok(Composed {
        probes: probes.to_vec(),
        witness,
        summary: total,
    })
}

/// Result of one corpus entry.
#[derive(Debug, Clone, Serialize)]
pub struct CorpusResult {
    pub name: String,
    pub expected: String,
    pub status: Status,
    pub passed: bool,
    pub probe_sets: usize,
    /// Probe sets whose witness disagrees with the formula.
    pub formula_mismatches: Vec<Vec<String>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
}

/// Runs every entry at its configured order and modulus and compares
/// witnesses with the formulas.
pub fn corpus_verify(engine: Engine, cap: u64) -> Vec<CorpusResult> {
    entries().iter().map(|e| verify_entry(e, engine, cap)).collect()
}

pub fn verify_entry(e: &CorpusEntry, engine: Engine, cap: u64) -> CorpusResult {
    let mut res = CorpusResult {
        name: e.name.into(),
        expected: String::new(),
        status: Status::Unknown,
        passed: false,
        probe_sets: 0,
        formula_mismatches: Vec::new(),
        error: None,
    };
    let t = e.t();
    let program = match e.load((!matches!(e.expectation, Expectation::IoHolds { .. })).then_some(t)) {
        Ok(p) => p,
        Err(err) => {
            res.error = Some(err.to_string());
            return res;
        }
    };
    match &e.expectation {
        Expectation::IoHolds { inputs, probes } => {
            res.expected = format!("({{{}}}, {{{}}})-NI", inputs.join(", "), probes.join(", "));
            let mut cfg = CheckConfig::new(Property::IoNi, 0, e.q).with_engine(engine);
            cfg.cap = cap;
            let checker = Checker::new(&program, cfg).expect("valid modulus");
            match check_io(&checker, inputs, probes) {
                Ok(o) => {
                    res.status = o.status;
                    res.probe_sets = 1;
                    res.passed = o.status == Status::Verified;
                }
                Err(err) => res.error = Some(err.to_string()),
            }
        }
        Expectation::Holds { property, t } | Expectation::Refuted { property, t } => {
            let want_refuted = matches!(e.expectation, Expectation::Refuted { .. });
            res.expected = format!("{} at t={t}{}", property.label(), if want_refuted { " refuted" } else { "" });
            let mut cfg = CheckConfig::new(*property, *t, e.q).with_engine(engine);
            cfg.cap = cap;
            let checker = Checker::new(&program, cfg).expect("valid modulus");
            let exposed = checker.program().clone();
            let hint_fn = e
                .formula
                .filter(|_| e.relation == Relation::Exact)
                .map(|f| move |probes: &[String]| f.expected(&exposed, probes));
            let hint = hint_fn.as_ref().map(|h| h as &(dyn Fn(&[String]) -> Option<Vec<String>> + Sync));
            match check_t_level(&checker, hint, None) {
                Ok(v) => {
                    res.status = v.status;
                    res.probe_sets = v.outcomes.len();
                    for o in &v.outcomes {
                        let bad = match (e.relation, e.formula) {
                            (Relation::Exact, Some(_)) => o.status == Status::Verified && o.expected_holds != Some(true),
                            (Relation::Subset, Some(f)) => {
                                let exp = f.expected(checker.program(), &o.probes).unwrap_or_default();
                                o.witness.as_ref().is_some_and(|w| !w.iter().all(|x| exp.contains(x)))
                            }
                            _ => false,
                        };
                        if bad {
                            res.formula_mismatches.push(o.probes.clone());
                        }
                    }
                    res.passed = if want_refuted {
                        v.status == Status::Refuted
                    } else {
                        v.status == Status::Verified && res.formula_mismatches.is_empty()
                    };
                }
                Err(err) => res.error = Some(err.to_string()),
            }
        }
    }
    res
}

/// Every exposed probe set of size at most `t`, as names.
pub fn probe_name_sets(p: &FlatProgram, t: usize) -> Vec<Vec<String>> {
    let exposed = crate::dsl::expose_internals(p);
    enumerate_probes(&exposed.outputs, t).into_iter().map(|s| s.names).collect()
}

/// Whether a composed witness respects the t-SNIU allowance for `probes`.
pub fn composed_within_sniu(p: &FlatProgram, c: &Composed) -> bool {
    let exposed = crate::dsl::expose_internals(p);
    let internal = c
        .probes
        .iter()
        .filter(|n| exposed.outputs.iter().any(|o| &o.name == *n && o.internal))
        .count();
    within_bounds(
        &exposed,
        &c.witness,
        crate::oracle::Bounds {
            per_family: internal,
            unshared: internal,
        },
    )
}
