//! Versioned JSON and human-readable reports.

use std::fmt::Write;

use serde_json::{json, Value as Json};
use sha2::{Digest, Sha256};

use crate::check::{CheckConfig, Engine, IoOutcome, Status, TVerdict};
use crate::dsl::FlatProgram;

pub const SCHEMA_VERSION: &str = "1.0.0";

/// Field holding the generation time; excluded from determinism comparisons.
pub const TIMESTAMP_FIELD: &str = "generated_at";

/// Stable identity of a run, used to validate checkpoints.
pub fn fingerprint(p: &FlatProgram, cfg: &CheckConfig, extra: &str) -> String {
    let mut h = Sha256::new();
    h.update(SCHEMA_VERSION.as_bytes());
    h.update(serde_json::to_vec(cfg).expect("config serializes"));
    h.update(format!("{:?}", p.inputs).as_bytes());
    h.update(format!("{:?}", p.body).as_bytes());
    h.update(p.ret.to_string().as_bytes());
    h.update(extra.as_bytes());
    h.finalize().iter().map(|b| format!("{b:02x}")).collect()
}

fn gadget_json(p: &FlatProgram) -> Json {
    let exposed = crate::dsl::expose_internals(p);
    json!({
        "name": p.name,
        "order": p.order(),
        "inputs": p.inputs.iter().map(|i| &i.name).collect::<Vec<_>>(),
        "outputs": p.outputs.iter().map(|o| &o.name).collect::<Vec<_>>(),
        "exposed_outputs": exposed.outputs.len(),
        "internal_outputs": exposed.internal_outputs().len(),
    })
}

fn config_json(cfg: &CheckConfig) -> Json {
    json!({
        "property": cfg.property,
        "t": cfg.t,
        "q": cfg.q,
        "engine": cfg.engine,
        "cap": cfg.cap,
        "probe_cap": cfg.probe_cap,
        "unshared_bound": cfg.unshared_bound,
        "unit_coefficients": cfg.unit_coefficients,
    })
}

fn envelope(p: &FlatProgram, cfg: &CheckConfig, status: Status, generated_at: &str) -> serde_json::Map<String, Json> {
    let mut m = serde_json::Map::new();
    m.insert("schema_version".into(), json!(SCHEMA_VERSION));
    m.insert("tool".into(), json!({"name": "maskcheck", "version": env!("CARGO_PKG_VERSION")}));
    m.insert(TIMESTAMP_FIELD.into(), json!(generated_at));
    m.insert("gadget".into(), gadget_json(p));
    m.insert("config".into(), config_json(cfg));
    m.insert("status".into(), json!(status));
    m.insert("exit_code".into(), json!(status.exit_code()));
    m
}

/// Report of a t-level run.
pub fn t_level_json(p: &FlatProgram, cfg: &CheckConfig, v: &TVerdict, generated_at: &str) -> Json {
    let mut m = envelope(p, cfg, v.status, generated_at);
    let by = |e: Engine| v.outcomes.iter().filter(|o| o.engine == e).count();
    m.insert(
        "summary".into(),
        json!({
            "probe_sets_total": v.total_probe_sets.to_string(),
            "checked": v.outcomes.len(),
            "verified": v.count(Status::Verified),
            "refuted": v.count(Status::Refuted),
            "unknown": v.count(Status::Unknown),
            "by_engine": {"oracle": by(Engine::Oracle), "symbolic": by(Engine::Symbolic)},
        }),
    );
    m.insert("probe_sets".into(), serde_json::to_value(&v.outcomes).expect("outcomes serialize"));
    m.insert(
        "unchecked".into(),
        json!({"count": v.unchecked_count.to_string(), "first": v.unchecked}),
    );
    Json::Object(m)
}

/// Report of a single (I, O) query.
pub fn io_json(p: &FlatProgram, cfg: &CheckConfig, o: &IoOutcome, generated_at: &str) -> Json {
    let mut m = envelope(p, cfg, o.status, generated_at);
    m.insert("query".into(), serde_json::to_value(o).expect("outcome serializes"));
    Json::Object(m)
}

/// Removes the timestamp so that two reports can be compared.
pub fn without_timestamp(mut report: Json) -> Json {
    if let Some(m) = report.as_object_mut() {
        m.remove(TIMESTAMP_FIELD);
    }
    report
}

fn set(names: &[String]) -> String {
    format!("{{{}}}", names.join(", "))
}

/// Table of probe set, engine, status and witness.
pub fn t_level_human(p: &FlatProgram, cfg: &CheckConfig, v: &TVerdict) -> String {
    let mut out = String::new();
    let _ = writeln!(
        out,
        "{}: {} t={} q={} engine={}",
        p.name,
        cfg.property.label(),
        cfg.t,
        cfg.q,
        cfg.engine.label()
    );
    let rows: Vec<[String; 4]> = v
        .outcomes
        .iter()
        .map(|o| {
            let detail = match o.status {
                Status::Verified => o.witness.as_deref().map(set).unwrap_or_default(),
                Status::Refuted => format!("{} counterexample(s)", o.counterexamples.len()),
                Status::Unknown => o.reason.clone().unwrap_or_default(),
            };
            [set(&o.probes), o.engine.label().into(), o.status.label().into(), detail]
        })
        .collect();
    let header = ["probes", "engine", "status", "witness"];
    let mut widths = header.map(str::len);
    for r in &rows {
        for (w, c) in widths.iter_mut().zip(r) {
            *w = (*w).max(c.chars().count());
        }
    }
    let line = |cells: [&str; 4]| {
        let mut s = String::new();
        for (i, c) in cells.iter().enumerate() {
            if i + 1 == cells.len() {
                s.push_str(c);
            } else {
                let pad = widths[i] - c.chars().count();
                let _ = write!(s, "{c}{}  ", " ".repeat(pad));
            }
        }
        s.trim_end().to_string()
    };
    let _ = writeln!(out, "{}", line(header));
    for r in &rows {
        let _ = writeln!(out, "{}", line([&r[0], &r[1], &r[2], &r[3]]));
    }
    for o in v.refuted() {
        for c in &o.raw_counterexamples {
            let _ = writeln!(
                out,
                "counterexample for {}: kept {} left {} right {}",
                set(&o.probes),
                set(&c.kept),
                assignment(&c.left),
                assignment(&c.right)
            );
        }
    }
    if v.unchecked_count > 0 {
        let _ = writeln!(out, "{} probe set(s) not checked (probe cap)", v.unchecked_count);
    }
    let _ = writeln!(
        out,
        "result: {} ({} verified, {} refuted, {} unknown of {})",
        v.status.label(),
        v.count(Status::Verified),
        v.count(Status::Refuted),
        v.count(Status::Unknown),
        v.total_probe_sets
    );
    out
}

fn assignment(a: &crate::semantics::Assignment) -> String {
    let parts: Vec<String> = a.iter().map(|(k, v)| format!("{k}={v}")).collect();
    format!("{{{}}}", parts.join(", "))
}

pub fn io_human(p: &FlatProgram, o: &IoOutcome) -> String {
    let mut out = format!(
        "{}: ({}, {})-NI {} by {}\n",
        p.name,
        set(&o.inputs),
        set(&o.probes),
        o.status.label(),
        o.engine.label()
    );
    if let Some(c) = &o.raw_counterexample {
        let _ = writeln!(out, "counterexample: left {} right {}", assignment(&c.left), assignment(&c.right));
    }
    if let Some(r) = &o.reason {
        let _ = writeln!(out, "reason: {r}");
    }
    out
}
