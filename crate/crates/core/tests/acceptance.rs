//! Acceptance criteria, one line each. Runs without the libtest harness so
//! the lines are always printed.

use std::collections::BTreeSet;
use std::time::{Duration, Instant};

use maskcheck::check::{check_t_level, with_jobs, CheckConfig, Checker, Engine, Property, Status, TVerdict};
use maskcheck::corpus::{
    compose_arner, composed_within_sniu, entries, entry, probe_name_sets, CorpusEntry, Expectation, Formula,
    StageSummaries,
};
use maskcheck::dsl::{expose_internals, FlatProgram};
use maskcheck::oracle::{check_cond_indep, check_io_ni, Kernel};
use maskcheck::semantics::{assignment_map, enumerate_assignments, interpret, FiniteDistribution, Modulus, Value};
use num_bigint::BigInt;
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

const CAP: u64 = 1 << 22;

type Outcome = Result<String, String>;
type Hint<'a> = &'a (dyn Fn(&[String]) -> Option<Vec<String>> + Sync);
type Criterion = (&'static str, fn() -> Outcome);

fn ensure(cond: bool, msg: impl FnOnce() -> String) -> Result<(), String> {
    if cond {
        Ok(())
    } else {
        Err(msg())
    }
}

fn load(name: &str, t: usize) -> FlatProgram {
    entry(name).unwrap().load(Some(t)).unwrap()
}

fn run(p: &FlatProgram, cfg: CheckConfig, hint: Option<Hint<'_>>) -> TVerdict {
    let c = Checker::new(p, cfg).unwrap();
    check_t_level(&c, hint, None).unwrap()
}

fn modulus(n: u32) -> Modulus {
    Modulus::new(n).unwrap()
}

fn refresh_oracle() -> Outcome {
    let start = Instant::now();
    let mut sets = 0;
    for t in [1, 2] {
        let p = load("refresh", t);
        let exposed = expose_internals(&p);
        let hint = |probes: &[String]| Formula::Refresh.expected(&exposed, probes);
        let cfg = CheckConfig::new(Property::TSni, t, 2).with_engine(Engine::Oracle);
        let v = with_jobs(1, || run(&p, cfg, Some(&hint)));
        ensure(v.status == Status::Verified, || format!("t={t}: {:?}", v.status))?;
        for o in &v.outcomes {
            ensure(o.expected_holds == Some(true) && o.witness == o.expected, || {
                format!("t={t} {:?}: witness {:?}, I_Refresh {:?}", o.probes, o.witness, o.expected)
            })?;
        }
        sets += v.outcomes.len();
    }
    let took = start.elapsed();
    ensure(took < Duration::from_secs(60), || format!("took {took:?}"))?;
    Ok(format!("{sets} probe sets, witnesses equal I_Refresh, {took:.2?} single-threaded"))
}

fn masked_add() -> Outcome {
    let p = load("masked_add", 1);
    let v = run(&p, CheckConfig::new(Property::TNi, 1, 2).with_engine(Engine::Oracle), None);
    ensure(v.status == Status::Verified, || format!("{:?}", v.status))?;
    let o = v
        .outcomes
        .iter()
        .find(|o| o.probes == ["C[0]"])
        .ok_or("no outcome for {C[0]}")?;
    let want = vec!["A[0]".to_string(), "B[0]".to_string()];
    ensure(o.witness.as_ref() == Some(&want), || format!("witness {:?}", o.witness))?;
    Ok("{C[0]} -> {A[0], B[0]}".into())
}

fn marn() -> Outcome {
    let p = load("mini_add_rep_noise", 2);
    let exposed = expose_internals(&p);
    let v = run(&p, CheckConfig::new(Property::TNiu, 2, 2).with_engine(Engine::Oracle), None);
    ensure(v.status == Status::Verified, || format!("{:?}", v.status))?;
    for o in &v.outcomes {
        let want = Formula::Marn.expected(&exposed, &o.probes);
        ensure(o.witness == want, || format!("{:?}: minimal {:?}, I_MARN {want:?}", o.probes, o.witness))?;
    }
    Ok(format!("{} probe sets, minimal witnesses equal I_MARN", v.outcomes.len()))
}

fn sec_mult() -> Outcome {
    let start = Instant::now();
    let result = with_jobs(8, || -> Outcome {
        let p1 = load("sec_mult", 1);
        let v1 = run(&p1, CheckConfig::new(Property::TSni, 1, 2).with_engine(Engine::Oracle), None);
        ensure(v1.status == Status::Verified, || format!("t=1 oracle: {:?}", v1.status))?;

        let p2 = load("sec_mult", 2);
        let exposed = expose_internals(&p2);
        let v2 = run(&p2, CheckConfig::new(Property::TSni, 2, 2).with_engine(Engine::Symbolic), None);
        ensure(v2.status == Status::Verified, || format!("t=2 symbolic: {:?}", v2.status))?;
        for o in &v2.outcomes {
            let w: BTreeSet<String> = o.witness.clone().unwrap_or_default().into_iter().collect();
            let ij: BTreeSet<String> = Formula::SecMult.expected(&exposed, &o.probes).unwrap().into_iter().collect();
            ensure(w.is_subset(&ij), || format!("{:?}: {w:?} not within {ij:?}", o.probes))?;
        }

        let k = Kernel::build(&p2, modulus(2), CAP).map_err(|e| e.to_string())?;
        let oracle = Checker::new(&p2, CheckConfig::new(Property::TSni, 2, 2).with_engine(Engine::Oracle)).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(2024);
        let sample: Vec<_> = v2.outcomes.choose_multiple(&mut rng, 100).collect();
        let sets = maskcheck::probes::enumerate_probes(&exposed.outputs, 2);
        for o in &sample {
            let w = o.witness.clone().unwrap();
            ensure(check_io_ni(&k, &w, &o.probes).map_err(|e| e.to_string())?.is_verified(), || {
                format!("oracle rejects symbolic witness {w:?} for {:?}", o.probes)
            })?;
            let ps = sets.iter().find(|s| s.names == o.probes).unwrap();
            let oc = oracle.check_probe_set(ps, None);
            ensure(oc.status == Status::Verified, || format!("oracle {:?} on {:?}", oc.status, o.probes))?;
        }
        Ok(format!(
            "t=1 oracle {} sets, t=2 symbolic {} sets within I u J, oracle spot check {} sets",
            v1.outcomes.len(),
            v2.outcomes.len(),
            sample.len()
        ))
    });
    let took = start.elapsed();
    let msg = result?;
    ensure(took < Duration::from_secs(600), || format!("took {took:?}"))?;
    Ok(format!("{msg}, {took:.2?} with 8 jobs"))
}

fn arner() -> Outcome {
    let p = load("add_rep_noise_er", 1);
    let stages = StageSummaries::new(1, 2, Engine::Hybrid).map_err(|e| e.to_string())?;
    let k = Kernel::build(&p, modulus(2), CAP).map_err(|e| e.to_string())?;
    let sets = probe_name_sets(&p, 1);
    for probes in &sets {
        let c = compose_arner(&p, probes, &stages).map_err(|e| format!("{probes:?}: {e}"))?;
        ensure(composed_within_sniu(&p, &c), || format!("{probes:?}: {:?} over the allowance", c.witness))?;
        ensure(check_io_ni(&k, &c.witness, probes).unwrap().is_verified(), || {
            format!("oracle rejects composed {:?} for {probes:?}", c.witness)
        })?;
    }
    let v = run(&p, CheckConfig::new(Property::TSniu, 1, 2).with_engine(Engine::Oracle), None);
    ensure(v.status == Status::Verified, || format!("oracle t-SNIU: {:?}", v.status))?;
    Ok(format!("{} probe sets composed and cross-checked by the oracle", sets.len()))
}

fn broken() -> Outcome {
    let mut notes = Vec::new();
    for name in ["broken_refresh", "broken_sec_mult"] {
        let p = load(name, 1);
        for engine in [Engine::Hybrid, Engine::Oracle] {
            let v = run(&p, CheckConfig::new(Property::TSni, 1, 2).with_engine(engine), None);
            ensure(v.status == Status::Refuted, || format!("{name} {engine:?}: {:?}", v.status))?;
            let mut n = 0;
            for o in v.refuted() {
                for c in &o.raw_counterexamples {
                    ensure(c.recheck(&p, modulus(2), CAP).unwrap(), || format!("{name}: {:?} does not recheck", o.probes))?;
                    n += 1;
                }
            }
            ensure(n > 0, || format!("{name}: no counterexamples"))?;
            if engine == Engine::Hybrid {
                notes.push(format!("{name} {n} counterexample(s)"));
            }
        }
    }
    Ok(notes.join(", "))
}

/// Random joint over four binary variables. Most are built from conditional
/// tables so that the premises of the axioms hold; the rest are arbitrary.
fn random_joint(rng: &mut ChaCha8Rng) -> FiniteDistribution {
    let mut roles = [0usize, 1, 2, 3];
    roles.shuffle(rng);
    let shape = rng.gen_range(0..4);
    let table = |rng: &mut ChaCha8Rng, n: usize| -> Vec<u64> {
        (0..n).map(|_| if rng.gen_bool(0.1) { 0 } else { rng.gen_range(1..6) }).collect()
    };
    let pz = table(rng, 2);
    let px_z = table(rng, 4);
    let py_z = table(rng, 4);
    let pw_yz = table(rng, 8);
    let pyw_z = table(rng, 8);
    let free = table(rng, 16);
    let mut rows = Vec::new();
    for code in 0..16u32 {
        let v: Vec<u32> = (0..4).map(|i| (code >> i) & 1).collect();
        // roles: x, y, w, z
        let (x, y, wv, z) = (
            v[roles[0]] as usize,
            v[roles[1]] as usize,
            v[roles[2]] as usize,
            v[roles[3]] as usize,
        );
        let weight = match shape {
            0 => pz[z] * px_z[2 * z + x] * py_z[2 * z + y] * pw_yz[4 * z + 2 * y + wv],
            1 => pz[z] * px_z[2 * z + x] * pyw_z[4 * z + 2 * y + wv],
            2 => px_z[x] * pyw_z[4 * z + 2 * y + wv],
            _ => free[code as usize],
        };
        rows.push((v.into_iter().map(Value::Ring).collect::<Vec<_>>(), BigInt::from(weight)));
    }
    FiniteDistribution::from_weights(rows).unwrap_or_else(|| FiniteDistribution::point(vec![Value::Ring(0); 4]))
}

fn semi_graphoid() -> Outcome {
    let start = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let ci = |j: &FiniteDistribution, a: &[usize], b: &[usize], c: &[usize]| check_cond_indep(j, a, b, c).unwrap();
    let cat = |a: &[usize], b: &[usize]| [a, b].concat();
    let mut premises = [0usize; 4];
    for _ in 0..1000 {
        let joint = random_joint(&mut rng);
        let mut vars = [0usize, 1, 2, 3];
        vars.shuffle(&mut rng);
        let x = &vars[..1];
        let y = &vars[1..2];
        let w = &vars[2..3];
        let z: &[usize] = if rng.gen_bool(0.7) { &vars[3..4] } else { &[] };
        if ci(&joint, x, y, z) {
            premises[0] += 1;
            ensure(ci(&joint, y, x, z), || "symmetry".into())?;
        }
        let yw = cat(y, w);
        if ci(&joint, x, &yw, z) {
            premises[1] += 1;
            ensure(ci(&joint, x, y, z), || "decomposition".into())?;
            premises[2] += 1;
            ensure(ci(&joint, x, y, &cat(z, w)), || "weak union".into())?;
        }
        if ci(&joint, x, y, z) && ci(&joint, x, w, &cat(y, z)) {
            premises[3] += 1;
            ensure(ci(&joint, x, &yw, z), || "contraction".into())?;
        }
    }
    let took = start.elapsed();
    ensure(premises.iter().all(|&n| n >= 50), || format!("premises rarely held: {premises:?}"))?;
    ensure(took < Duration::from_secs(30), || format!("took {took:?}"))?;
    Ok(format!(
        "1000 joints; premises held: symmetry {}, decomposition {}, weak union {}, contraction {}; {took:.2?}",
        premises[0], premises[1], premises[2], premises[3]
    ))
}

fn subsets(n: usize) -> impl Iterator<Item = Vec<usize>> {
    (0u32..(1 << n)).map(move |m| (0..n).filter(|i| m >> i & 1 == 1).collect())
}

fn entry_t(e: &CorpusEntry) -> usize {
    match e.expectation {
        Expectation::IoHolds { .. } => 1,
        _ => e.t().max(1),
    }
}

fn theorem_one() -> Outcome {
    let mut checks = 0u64;
    for e in entries() {
        let t = entry_t(&e);
        let p = e.load((!matches!(e.expectation, Expectation::IoHolds { .. })).then_some(t)).unwrap();
        for n in [2, 3] {
            let k = Kernel::build(&p, modulus(n), CAP).map_err(|err| format!("{} q={n}: {err}", e.name))?;
            let n_in = p.inputs.len();
            for ps in maskcheck::probes::enumerate_probes(&expose_internals(&p).outputs, t) {
                let joint = k.joint_with_uniform_inputs(&ps.positions);
                let b: Vec<usize> = (0..ps.positions.len()).map(|i| n_in + i).collect();
                for i in subsets(n_in) {
                    let a: Vec<usize> = (0..n_in).filter(|x| !i.contains(x)).collect();
                    let names: Vec<String> = i.iter().map(|&x| p.inputs[x].name.clone()).collect();
                    let ni = check_io_ni(&k, &names, &ps.names).unwrap().is_verified();
                    let indep = check_cond_indep(&joint, &a, &b, &i).unwrap();
                    ensure(ni == indep, || format!("{} q={n} I={names:?} O={:?}: NI {ni}, CI {indep}", e.name, ps.names))?;
                    checks += 1;
                }
            }
        }
    }
    Ok(format!("{checks} (I, O) pairs agree over the corpus, q in {{2, 3}}"))
}

fn exposing() -> Outcome {
    let mut assignments = 0;
    for e in entries() {
        let p = e.load(None).unwrap();
        let exposed = expose_internals(&p);
        let pos: Vec<usize> = exposed
            .outputs
            .iter()
            .enumerate()
            .filter(|(_, o)| !o.internal)
            .map(|(i, _)| i)
            .collect();
        ensure(pos.len() == p.outputs.len(), || format!("{}: original outputs lost", e.name))?;
        for n in [2, 3] {
            let q = modulus(n);
            for values in enumerate_assignments(&p, q) {
                let a = assignment_map(&p, &values);
                let d = interpret(&p, &a, q, CAP).map_err(|err| err.to_string())?;
                let x = interpret(&exposed, &a, q, CAP).map_err(|err| err.to_string())?;
                let m = x.marginal(&pos).map_err(|err| err.to_string())?;
                ensure(m == d, || format!("{} q={n} at {a:?}", e.name))?;
                assignments += 1;
            }
        }
    }
    Ok(format!("{assignments} assignments, exposed marginals equal the original outputs"))
}

fn main() {
    let criteria: [Criterion; 9] = [
        ("refresh t-SNI by the oracle at t=1,2", refresh_oracle),
        ("masked add t-NI witness", masked_add),
        ("noise gadget t-NIU witnesses", marn),
        ("multiplication t-SNI", sec_mult),
        ("add-rep-noise t-SNIU by composition", arner),
        ("broken variants refuted", broken),
        ("semi-graphoid properties", semi_graphoid),
        ("NI as conditional independence", theorem_one),
        ("exposing preserves outputs", exposing),
    ];
    let mut failed = 0;
    for (i, (name, f)) in criteria.iter().enumerate() {
        match f() {
            Ok(detail) => println!("criterion {}: PASS {name}: {detail}", i + 1),
            Err(why) => {
                failed += 1;
                println!("criterion {}: FAIL {name}: {why}", i + 1);
            }
        }
    }
    if failed > 0 {
        eprintln!("{failed} criterion/criteria failed");
        std::process::exit(1);
    }
}
