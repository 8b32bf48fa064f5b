//! Composition of (I, O)-NI summaries: sequencing, loops and weakening.

use std::collections::{BTreeMap, BTreeSet};

use serde::Serialize;
use thiserror::Error;

use super::uniformize::{Certificate, Rule, RuleStep};

/// A proved `(inputs, outputs)`-NI fact about one component.
#[derive(Debug, Clone, PartialEq, Eq, Default, Serialize)]
pub struct NiSummary {
    pub label: String,
    pub inputs: BTreeSet<String>,
    pub outputs: BTreeSet<String>,
    pub certificate: Certificate,
}

impl NiSummary {
    pub fn new<I, O>(label: impl Into<String>, inputs: I, outputs: O, certificate: Certificate) -> Self
    where
        I: IntoIterator<Item = String>,
        O: IntoIterator<Item = String>,
    {
        NiSummary {
            label: label.into(),
            inputs: inputs.into_iter().collect(),
            outputs: outputs.into_iter().collect(),
            certificate,
        }
    }

    /// The summary of a component that observes nothing.
    pub fn identity(label: impl Into<String>) -> Self {
        NiSummary {
            label: label.into(),
            ..Default::default()
        }
    }

    /// Renames variables through `map`; unmapped names are kept.
    pub fn rename(&self, map: &BTreeMap<String, String>) -> Self {
        let f = |s: &String| map.get(s).cloned().unwrap_or_else(|| s.clone());
        NiSummary {
            label: self.label.clone(),
            inputs: self.inputs.iter().map(f).collect(),
            outputs: self.outputs.iter().map(f).collect(),
            certificate: self.certificate.clone(),
        }
    }
}

/// Where an input of the second component comes from.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Source {
    /// An output of the first component.
    Wire(String),
    /// A variable of the surrounding context.
    Context(String),
}

/// Sources for the inputs of the second component, by its own input names.
pub type Wiring = BTreeMap<String, Source>;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ComposeError {
    #[error("input `{0}` of the second component is neither produced by the first nor in context")]
    Unwired(String),
    #[error("wire `{wire}` is needed by `{needed_by}` but not covered by the first component's outputs")]
    Uncovered { wire: String, needed_by: String },
    #[error("iteration {index}: initial input `{var}` is not a context variable")]
    LoopInit { index: usize, var: String },
}

fn fmt_set(s: &BTreeSet<String>) -> String {
    format!("{{{}}}", s.iter().cloned().collect::<Vec<_>>().join(", "))
}

fn describe(s: &NiSummary) -> String {
    format!("({}, {})-NI", fmt_set(&s.inputs), fmt_set(&s.outputs))
}

/// `X <- M; N`: from `(I_M, O_M)` for `M` and `(I_N, O_N)` for `N`, where the
/// wires in `I_N` are among `O_M`, derive `(I_M ∪ (I_N ∩ context), O_M ∪ O_N)`.
pub fn compose_sequential(m: &NiSummary, n: &NiSummary, wiring: &Wiring) -> Result<NiSummary, ComposeError> {
    let mut inputs = m.inputs.clone();
    let mut wires = Vec::new();
    for i in &n.inputs {
        match wiring.get(i) {
            None => return Err(ComposeError::Unwired(i.clone())),
            Some(Source::Wire(w)) => {
                if !m.outputs.contains(w) {
                    return Err(ComposeError::Uncovered {
                        wire: w.clone(),
                        needed_by: n.label.clone(),
                    });
                }
                wires.push(w.clone());
            }
            Some(Source::Context(c)) => {
                inputs.insert(c.clone());
            }
        }
    }
    let outputs: BTreeSet<String> = m
        .outputs
        .iter()
        .chain(n.outputs.iter())
        .cloned()
        .collect();
    let mut certificate = m.certificate.clone();
    certificate.extend(n.certificate.clone());
    let label = format!("{}; {}", m.label, n.label);
    let out = NiSummary {
        label,
        inputs,
        outputs,
        certificate: Certificate::default(),
    };
    certificate.steps.push(RuleStep {
        rule: Rule::SeqCompose,
        touched: wires,
        before: format!("{} ; {}", describe(m), describe(n)),
        after: describe(&out),
        rewrite: None,
    });
    Ok(NiSummary { certificate, ..out })
}

/// Extends a summary by passthrough variables `z`, which are both observed
/// and simulated from themselves.
pub fn weaken(s: &NiSummary, z: &BTreeSet<String>) -> NiSummary {
    let mut out = s.clone();
    out.inputs.extend(z.iter().cloned());
    out.outputs.extend(z.iter().cloned());
    out.certificate.steps.push(RuleStep {
        rule: Rule::Weakening,
        touched: z.iter().cloned().collect(),
        before: describe(s),
        after: describe(&out),
        rewrite: None,
    });
    out
}

/// One unrolled loop iteration: its summary, the wiring from the previous
/// iteration, and the variables read by its initial expressions.
#[derive(Debug, Clone)]
pub struct Iteration {
    pub summary: NiSummary,
    pub wiring: Wiring,
    pub init_vars: Vec<String>,
}

/// Folds sequential composition over the iterations of a loop. Variables
/// read by the initial expressions must be context variables.
pub fn compose_loop(
    label: &str,
    iterations: &[Iteration],
    context: &BTreeSet<String>,
) -> Result<NiSummary, ComposeError> {
    for (index, it) in iterations.iter().enumerate() {
        if let Some(v) = it.init_vars.iter().find(|v| !context.contains(*v)) {
            return Err(ComposeError::LoopInit {
                index,
                var: v.clone(),
            });
        }
    }
    let Some(first) = iterations.first() else {
        let mut id = NiSummary::identity(label);
        id.certificate.steps.push(RuleStep {
            rule: Rule::LoopCompose,
            touched: Vec::new(),
            before: "no iterations".into(),
            after: describe(&id),
            rewrite: None,
        });
        return Ok(id);
    };
    let mut acc = first.summary.clone();
    acc.label = format!("{label}[0]");
    for (k, it) in iterations.iter().enumerate().skip(1) {
        let mut s = it.summary.clone();
        s.label = format!("{label}[{k}]");
        acc = compose_sequential(&acc, &s, &it.wiring)?;
    }
    let steps = iterations.len();
    acc.label = label.to_string();
    let after = describe(&acc);
    acc.certificate.steps.push(RuleStep {
        rule: Rule::LoopCompose,
        touched: iterations.iter().flat_map(|i| i.init_vars.iter().cloned()).collect(),
        before: format!("{steps} iteration summaries"),
        after,
        rewrite: None,
    });
    Ok(acc)
}

/// Wiring that resolves every name present in `produced` to a wire and
/// everything else to a context variable of the same name.
pub fn wiring_by_name<'a>(inputs: impl IntoIterator<Item = &'a String>, produced: &BTreeSet<String>) -> Wiring {
    inputs
        .into_iter()
        .map(|i| {
            let src = if produced.contains(i) {
                Source::Wire(i.clone())
            } else {
                Source::Context(i.clone())
            };
            (i.clone(), src)
        })
        .collect()
}
