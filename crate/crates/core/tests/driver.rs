use maskcheck::check::{check_t_level, with_jobs, CheckConfig, Checker, Engine, Property, Status};
use maskcheck::corpus::{corpus_verify, entry, Formula};
use maskcheck::dsl::FlatProgram;
use maskcheck::report::{fingerprint, t_level_json, without_timestamp, SCHEMA_VERSION, TIMESTAMP_FIELD};

fn checker(name: &str, prop: Property, t: usize, engine: Engine) -> (FlatProgram, Checker) {
    let p = entry(name).unwrap().load(Some(t)).unwrap();
    let c = Checker::new(&p, CheckConfig::new(prop, t, 2).with_engine(engine)).unwrap();
    (p, c)
}

#[test]
fn reports_are_identical_across_job_counts() {
    for (name, prop, t) in [
        ("sec_mult", Property::TSni, 2),
        ("refresh", Property::TSni, 2),
        ("broken_refresh", Property::TSni, 1),
    ] {
        let (p, c) = checker(name, prop, t, Engine::Hybrid);
        let run = |jobs, ts: &str| {
            let v = with_jobs(jobs, || check_t_level(&c, None, None).unwrap());
            t_level_json(&p, c.config(), &v, ts)
        };
        let one = run(1, "2026-01-01T00:00:00Z");
        let many = run(8, "2026-06-01T12:00:00Z");
        assert_ne!(one, many, "timestamps differ");
        let (a, b) = (without_timestamp(one), without_timestamp(many));
        assert_eq!(serde_json::to_string(&a).unwrap(), serde_json::to_string(&b).unwrap(), "{name}");
        assert!(a.get(TIMESTAMP_FIELD).is_none());
        assert_eq!(a["schema_version"], SCHEMA_VERSION);
    }
}

#[test]
fn checkpoint_resume_gives_same_verdicts() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("run.ckpt");
    let (p, c) = checker("sec_mult", Property::TSni, 2, Engine::Hybrid);
    let fp = fingerprint(&p, c.config(), "");
    let fresh = check_t_level(&c, None, None).unwrap();
    let first = check_t_level(&c, None, Some((&path, &fp))).unwrap();
    assert_eq!(first.status, Status::Verified);
    let written = std::fs::read_to_string(&path).unwrap();
    let lines: Vec<&str> = written.lines().collect();
    assert!(lines.len() > fresh.outcomes.len() / 2);

    // Simulate an interrupted run: keep the header and part of the records.
    let partial = lines[..lines.len() / 3].join("\n") + "\n";
    std::fs::write(&path, partial).unwrap();
    let resumed = check_t_level(&c, None, Some((&path, &fp))).unwrap();
    assert_eq!(resumed.outcomes, fresh.outcomes);
    assert_eq!(resumed.status, fresh.status);

    let again = check_t_level(&c, None, Some((&path, &fp))).unwrap();
    assert_eq!(again.outcomes, fresh.outcomes);
}

#[test]
fn checkpoint_rejects_other_runs() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("run.ckpt");
    let (p, c) = checker("refresh", Property::TSni, 2, Engine::Oracle);
    let fp = fingerprint(&p, c.config(), "");
    check_t_level(&c, None, Some((&path, &fp))).unwrap();
    let (p2, c2) = checker("refresh", Property::TNi, 2, Engine::Oracle);
    let fp2 = fingerprint(&p2, c2.config(), "");
    assert_ne!(fp, fp2);
    assert!(check_t_level(&c2, None, Some((&path, &fp2))).is_err());
}

#[test]
fn hints_become_reported_witnesses() {
    let (p, c) = checker("refresh", Property::TSni, 2, Engine::Oracle);
    let hint = |probes: &[String]| Formula::Refresh.expected(&maskcheck::dsl::expose_internals(&p), probes);
    let v = check_t_level(&c, Some(&hint), None).unwrap();
    assert_eq!(v.status, Status::Verified);
    for o in &v.outcomes {
        assert_eq!(o.expected_holds, Some(true), "{:?}", o.probes);
        assert_eq!(o.witness, o.expected);
        let m = o.minimal_witness.as_ref().unwrap();
        assert!(m.len() <= o.witness.as_ref().unwrap().len());
    }
    assert!(v.outcomes.iter().any(|o| o.minimal_witness != o.witness));
}

#[test]
fn probe_cap_leaves_sets_unchecked() {
    let p = entry("sec_mult").unwrap().load(Some(2)).unwrap();
    let mut cfg = CheckConfig::new(Property::TSni, 2, 2);
    cfg.probe_cap = 10;
    let c = Checker::new(&p, cfg).unwrap();
    let v = check_t_level(&c, None, None).unwrap();
    assert_eq!(v.outcomes.len(), 10);
    assert_eq!(v.status, Status::Unknown);
    assert_eq!(v.unchecked_count, v.total_probe_sets - 10);
    assert!(!v.unchecked.is_empty());
}

#[test]
fn small_cap_yields_unknown_not_verified() {
    let p = entry("sec_mult").unwrap().load(Some(2)).unwrap();
    let mut cfg = CheckConfig::new(Property::TSni, 2, 2).with_engine(Engine::Oracle);
    cfg.cap = 16;
    let c = Checker::new(&p, cfg).unwrap();
    let v = check_t_level(&c, None, None).unwrap();
    assert_eq!(v.status, Status::Unknown);
    assert!(v.outcomes.iter().all(|o| o.reason.is_some()));
}

#[test]
fn bundled_corpus_passes() {
    for engine in [Engine::Hybrid, Engine::Oracle] {
        for r in corpus_verify(engine, 1 << 22) {
            assert!(r.passed, "{} ({engine:?}): {:?} {:?}", r.name, r.error, r.formula_mismatches);
        }
    }
}
