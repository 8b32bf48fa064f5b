use std::collections::{BTreeMap, BTreeSet};

use maskcheck::check::{check_t_level, CheckConfig, Checker, Engine, Property, Status};
use maskcheck::corpus::{
    arner_formula, compose_arner, composed_within_sniu, entries, entry, probe_name_sets, Formula, StageSummaries,
};
use maskcheck::dsl::{load_gadget, FlatProgram, Overrides, ORDER_OVERRIDE};
use maskcheck::oracle::{check_io_ni, Kernel, OracleError};
use maskcheck::semantics::{Modulus, Value};
use maskcheck::symbolic::*;

const CAP: u64 = 1 << 22;

fn q(n: u32) -> Modulus {
    Modulus::new(n).unwrap()
}

fn names(v: &[&str]) -> Vec<String> {
    v.iter().map(|s| s.to_string()).collect()
}

fn opts() -> UniformizeOptions {
    UniformizeOptions::default()
}

fn state(name: &str, t: usize, n: u32) -> (FlatProgram, SymbolicState) {
    let p = entry(name).unwrap().load(Some(t)).unwrap();
    let s = to_symbolic(&maskcheck::dsl::expose_internals(&p), q(n)).unwrap();
    (p, s)
}

/// Inputs the symbolic engine needs for `probes`.
fn needed(s: &SymbolicState, probes: &[String]) -> Vec<String> {
    let ps = ProbeState::new(s, probes).unwrap();
    needed_inputs(&uniformize(&ps, opts()).state)
}

#[test]
fn normal_forms_render() {
    let (_, s) = state("sec_mult", 1, 3);
    let r = |n: &str| s.render(s.get(n).unwrap());
    assert_eq!(r("P[0][1]"), "(A[0])*(B[1])");
    assert_eq!(r("C[0][1]"), "-Q[0][1] + (A[0])*(B[0])");
    assert_eq!(r("C[1][1]"), "Q[0][1] + (A[0])*(B[1]) + (A[1])*(B[0]) + (A[1])*(B[1])");
    let (_, s) = state("refresh", 2, 2);
    assert_eq!(s.render(s.get("C[2][2]").unwrap()), "A[2] + R[0][2] + R[1][2]");
    let (_, s) = state("refresh", 2, 3);
    assert_eq!(s.render(s.get("C[2][2]").unwrap()), "A[2] - R[0][2] - R[1][2]");
}

#[test]
fn unsupported_constructs_are_reported() {
    let p = load_gadget("unshared x\nunshared y\nb <- x == y\nreturn b\n", &Overrides::new()).unwrap();
    let s = to_symbolic(&p, q(2)).unwrap();
    assert!(ProbeState::new(&s, &names(&["b"])).is_ok());
    assert!(matches!(ProbeState::new(&s, &names(&["zz"])), Err(SymbolicError::UnknownVariable(_))));
}

#[test]
fn uniformize_examples() {
    let (_, s) = state("sec_mult", 1, 3);
    let ps = ProbeState::new(&s, &names(&["C[0][1]"])).unwrap();
    let u = uniformize(&ps, opts());
    assert_eq!(u.state.render_probe(0), "$u0");
    assert_eq!(u.steps.len(), 1);
    assert_eq!(u.steps[0].rule, Rule::UnifBijection);
    assert!(needed_inputs(&u.state).is_empty());

    let ps = ProbeState::new(&s, &names(&["C[1][1]", "R[0][1]"])).unwrap();
    let u = uniformize(&ps, opts());
    assert!(u.steps.is_empty(), "Q[0][1] occurs twice");
    assert_eq!(needed_inputs(&u.state), names(&["A[0]", "A[1]", "B[0]", "B[1]"]));

    let (_, s) = state("refresh", 2, 2);
    assert_eq!(needed(&s, &names(&["C[0][1]"])), Vec::<String>::new());
    assert_eq!(needed(&s, &names(&["C[0][1]", "R[0][1]"])), names(&["A[0]"]));
    assert_eq!(needed(&s, &names(&["C[0][2]", "C[1][2]"])), Vec::<String>::new());
    assert_eq!(needed(&s, &names(&["C[0][2]", "C[1][2]", "C[2][2]"])), names(&["A[0]", "A[1]", "A[2]"]));
    assert_eq!(needed(&s, &names(&["C[0][0]", "C[1][0]"])), names(&["A[0]", "A[1]"]));
}

#[test]
fn bare_uniforms_are_left_alone() {
    let (_, s) = state("refresh", 2, 2);
    let ps = ProbeState::new(&s, &names(&["R[0][1]"])).unwrap();
    let u = uniformize(&ps, opts());
    assert!(u.steps.is_empty());
    assert!(needed_inputs(&u.state).is_empty());
}

#[test]
fn non_unit_coefficients_are_missed_without_flag() {
    let src = "unshared x\nk <- unif\ny <- x + 2 * k\nreturn y\n";
    let p = load_gadget(src, &Overrides::new()).unwrap();
    let s = to_symbolic(&p, q(5)).unwrap();
    let ps = ProbeState::new(&s, &names(&["y"])).unwrap();
    let strict = uniformize(&ps, UniformizeOptions { unit_coefficients: false });
    assert_eq!(needed_inputs(&strict.state), names(&["x"]));
    assert_eq!(strict.missed.len(), 1);
    let loose = uniformize(&ps, UniformizeOptions { unit_coefficients: true });
    assert!(needed_inputs(&loose.state).is_empty());
    let s3 = to_symbolic(&p, q(3)).unwrap();
    let ps3 = ProbeState::new(&s3, &names(&["y"])).unwrap();
    assert!(needed_inputs(&uniformize(&ps3, opts()).state).is_empty(), "2 is -1 mod 3");
    let s4 = to_symbolic(&p, q(4)).unwrap();
    let ps4 = ProbeState::new(&s4, &names(&["y"])).unwrap();
    let u = uniformize(&ps4, UniformizeOptions { unit_coefficients: true });
    assert_eq!(needed_inputs(&u.state), names(&["x"]), "2 is not invertible mod 4");
}

#[test]
fn verify_reports_certificates() {
    let (_, s) = state("refresh", 2, 2);
    let v = verify_io_ni_symbolic(&s, &[], &names(&["C[0][2]"]), opts()).unwrap();
    assert_eq!(v.status, SymbolicStatus::Verified);
    let rules = v.certificate.rules();
    assert!(rules.contains(&Rule::UnifBijection));
    assert!(rules.contains(&Rule::GenWeakUnion));
    let v = verify_io_ni_symbolic(&s, &[], &names(&["C[0][1]", "R[0][1]"]), opts()).unwrap();
    assert_eq!(v.status, SymbolicStatus::Unknown);
    assert_eq!(v.needed, names(&["A[0]"]));
    let v = verify_io_ni_symbolic(&s, &names(&["A[0]", "A[1]"]), &names(&["C[0][0]"]), opts()).unwrap();
    assert!(v.certificate.rules().contains(&Rule::Monotonicity));
}

#[test]
fn rule_labels_are_stable() {
    let labels: Vec<&str> = Rule::ALL.iter().map(|r| r.label()).collect();
    assert_eq!(
        labels,
        vec!["Unif-Bijection", "Gen-Weak-Union", "Monotonicity", "Seq-Compose", "Loop-Compose", "Weakening", "Transfer-Own"]
    );
    for r in Rule::ALL {
        assert_eq!(serde_json::to_value(r).unwrap(), serde_json::json!(r.label()));
    }
}

/// Every probe set the symbolic engine verifies is confirmed by the oracle.
#[test]
fn symbolic_is_sound_against_oracle() {
    let mut checked = 0;
    for e in entries() {
        for n in [2, 3] {
            for t in 1..=2 {
                let Ok(p) = e.load(Some(t)) else { continue };
                let k = match Kernel::build(&p, q(n), CAP) {
                    Ok(k) => k,
                    Err(OracleError::Cap { .. }) => continue,
                    Err(err) => panic!("{err}"),
                };
                let s = to_symbolic(&maskcheck::dsl::expose_internals(&p), q(n)).unwrap();
                for probes in probe_name_sets(&p, t) {
                    let v = verify_io_ni_symbolic(&s, &needed(&s, &probes), &probes, opts()).unwrap();
                    assert_eq!(v.status, SymbolicStatus::Verified);
                    assert!(
                        check_io_ni(&k, &v.needed, &probes).unwrap().is_verified(),
                        "{} q={n} {probes:?} needs more than {:?}",
                        e.name,
                        v.needed
                    );
                    checked += 1;
                }
            }
        }
    }
    assert!(checked > 500, "{checked}");
}

/// Each recorded bijection, applied to the state before it, maps its atom
/// onto every ring element for each fixed value of the other atoms.
#[test]
fn each_rewrite_is_a_bijection() {
    for (name, t) in [("refresh", 2), ("sec_mult", 1), ("mini_add_rep_noise", 2), ("broken_sec_mult", 1)] {
        let (p, s) = state(name, t, 3);
        for probes in probe_name_sets(&p, t) {
            let initial = ProbeState::new(&s, &probes).unwrap();
            let u = uniformize(&initial, opts());
            for (k, step) in u.steps.iter().enumerate() {
                let before = replay(&initial, &u.steps[..k], opts()).unwrap();
                let rw = step.rewrite.as_ref().expect("uniformization steps carry a rewrite");
                let comp = &before.exprs[rw.probe][rw.component];
                let mut others: BTreeSet<Atom> = BTreeSet::new();
                for exprs in &before.exprs {
                    for c in exprs {
                        c.atoms_into(&mut others);
                    }
                }
                for (pi, exprs) in before.exprs.iter().enumerate() {
                    for (ci, c) in exprs.iter().enumerate() {
                        if (pi, ci) != (rw.probe, rw.component) {
                            assert!(!c.atoms().contains(&rw.atom), "{name} {probes:?}: atom reused");
                        }
                    }
                }
                others.remove(&rw.atom);
                let others: Vec<Atom> = others.into_iter().collect();
                assert!(others.len() <= 8);
                let combos = 3u32.pow(others.len() as u32);
                for code in 0..combos {
                    let mut env: BTreeMap<Atom, u32> = BTreeMap::new();
                    let mut c = code;
                    for a in &others {
                        env.insert(*a, c % 3);
                        c /= 3;
                    }
                    let mut image = BTreeSet::new();
                    for x in 0..3 {
                        let mut env = env.clone();
                        env.insert(rw.atom, x);
                        let f = |a: Atom| match a {
                            Atom::Input(_) | Atom::Uniform(_) | Atom::Fresh(_) => Value::Ring(env[&a]),
                        };
                        image.insert(eval_sym(comp, &f, q(3)));
                    }
                    assert_eq!(image.len(), 3, "{name} {probes:?} step {k}");
                }
            }
        }
    }
}

#[test]
fn certificates_replay() {
    for (name, t) in [("refresh", 2), ("sec_mult", 2), ("mini_add_rep_noise", 2)] {
        let (p, s) = state(name, t, 2);
        for probes in probe_name_sets(&p, t) {
            let initial = ProbeState::new(&s, &probes).unwrap();
            let u = uniformize(&initial, opts());
            assert_eq!(replay(&initial, &u.steps, opts()).unwrap(), u.state);
            if let Some(first) = u.steps.first() {
                let mut bad = u.steps.clone();
                let rw = bad[0].rewrite.as_mut().unwrap();
                rw.component += 1 + initial.exprs[rw.probe].len();
                assert!(replay(&initial, &bad, opts()).is_err(), "{name} {probes:?} {first:?}");
                let mut bad = u.steps.clone();
                let rw = bad[0].rewrite.as_mut().unwrap();
                rw.atom = Atom::Input(0);
                assert!(replay(&initial, &bad, opts()).is_err());
            }
        }
    }
}

#[test]
fn formulas_bound_symbolic_witnesses() {
    for n in [2, 3] {
        for t in 1..=3 {
            let (p, s) = state("refresh", t, n);
            for probes in probe_name_sets(&p, t) {
                let need: BTreeSet<String> = needed(&s, &probes).into_iter().collect();
                let f: BTreeSet<String> = Formula::Refresh.expected(&p, &probes).unwrap().into_iter().collect();
                assert!(need.is_subset(&f), "refresh t={t} {probes:?}: {need:?} vs {f:?}");
            }
            let (p, s) = state("mini_add_rep_noise", t, n);
            for probes in probe_name_sets(&p, t) {
                assert_eq!(needed(&s, &probes), Formula::Marn.expected(&p, &probes).unwrap(), "{probes:?}");
            }
        }
        for t in 1..=2 {
            let (p, s) = state("sec_mult", t, n);
            for probes in probe_name_sets(&p, t) {
                let need: BTreeSet<String> = needed(&s, &probes).into_iter().collect();
                let f: BTreeSet<String> = Formula::SecMult.expected(&p, &probes).unwrap().into_iter().collect();
                assert!(need.is_subset(&f), "sec_mult t={t} {probes:?}: {need:?} vs {f:?}");
            }
        }
    }
}

const DOUBLE_REFRESH: &str = "gadget double_refresh
order t = 1
shares A[t + 1]

for i in 0..t {
    C[i][0] <- A[i]
}
R[0][1] <- unif
C[0][1] <- C[0][0] + R[0][1]
C[1][1] <- C[1][0] - R[0][1]
for i in 0..t {
    D[i][0] <- C[i][1]
}
S[0][1] <- unif
D[0][1] <- D[0][0] + S[0][1]
D[1][1] <- D[1][0] - S[0][1]
return (D[i][1] for i in 0..t)
";

fn rename_map(pairs: &[(&str, &str)]) -> BTreeMap<String, String> {
    pairs.iter().map(|(a, b)| (a.to_string(), b.to_string())).collect()
}

/// Summary of one refresh stage, derived symbolically on the standalone
/// gadget (local names).
fn stage(s: &SymbolicState, local_probes: &[String]) -> NiSummary {
    let need = needed(s, local_probes);
    let v = verify_io_ni_symbolic(s, &need, local_probes, opts()).unwrap();
    assert_eq!(v.status, SymbolicStatus::Verified);
    NiSummary::new("refresh", need, local_probes.to_vec(), v.certificate)
}

#[test]
fn sequential_refreshes_compose() {
    let (_, s) = state("refresh", 1, 2);
    let second = rename_map(&[
        ("A[0]", "C[0][1]"),
        ("A[1]", "C[1][1]"),
        ("R[0][1]", "S[0][1]"),
        ("C[0][0]", "D[0][0]"),
        ("C[1][0]", "D[1][0]"),
        ("C[0][1]", "D[0][1]"),
        ("C[1][1]", "D[1][1]"),
    ]);
    let back: BTreeMap<String, String> = second.iter().map(|(a, b)| (b.clone(), a.clone())).collect();
    let p = load_gadget(DOUBLE_REFRESH, &Overrides::new()).unwrap();
    let k = Kernel::build(&p, q(2), CAP).unwrap();
    for probes in probe_name_sets(&p, 2) {
        let (late, early): (Vec<String>, Vec<String>) =
            probes.iter().cloned().partition(|n| n.starts_with('D') || n.starts_with('S'));
        let local: Vec<String> = late.iter().map(|n| back[n].clone()).collect();
        let n_sum = stage(&s, &local).rename(&second);
        let mut first_probes: BTreeSet<String> = early.into_iter().collect();
        first_probes.extend(n_sum.inputs.iter().cloned());
        let first_probes: Vec<String> = first_probes.into_iter().collect();
        let m_sum = stage(&s, &first_probes);
        let wiring = wiring_by_name(&n_sum.inputs, &m_sum.outputs);
        let c = compose_sequential(&m_sum, &n_sum, &wiring).unwrap();
        assert!(probes.iter().all(|o| c.outputs.contains(o)));
        let ins: Vec<String> = c.inputs.iter().cloned().collect();
        let outs: Vec<String> = c.outputs.iter().cloned().collect();
        assert!(check_io_ni(&k, &ins, &outs).unwrap().is_verified(), "{probes:?}: {c:?}");
        assert!(check_io_ni(&k, &ins, &probes).unwrap().is_verified());
        assert!(c.certificate.rules().contains(&Rule::SeqCompose));
    }
}

#[test]
fn wiring_errors() {
    let m = NiSummary::new("m", names(&["a"]), names(&["x"]), Certificate::default());
    let n = NiSummary::new("n", names(&["x", "y"]), names(&["z"]), Certificate::default());
    let mut w = Wiring::new();
    w.insert("x".into(), Source::Wire("x".into()));
    assert_eq!(compose_sequential(&m, &n, &w), Err(ComposeError::Unwired("y".into())));
    w.insert("y".into(), Source::Wire("y".into()));
    assert!(matches!(compose_sequential(&m, &n, &w), Err(ComposeError::Uncovered { ref wire, .. }) if wire == "y"));
    w.insert("y".into(), Source::Context("b".into()));
    let c = compose_sequential(&m, &n, &w).unwrap();
    assert_eq!(c.inputs, ["a", "b"].iter().map(|s| s.to_string()).collect());
    assert_eq!(c.outputs, ["x", "z"].iter().map(|s| s.to_string()).collect());
}

#[test]
fn loops_compose() {
    let ctx: BTreeSet<String> = names(&["a"]).into_iter().collect();
    let id = compose_loop("empty", &[], &ctx).unwrap();
    assert!(id.inputs.is_empty() && id.outputs.is_empty());
    assert_eq!(id.certificate.rules(), vec![Rule::LoopCompose]);

    let first = Iteration {
        summary: NiSummary::new("body", names(&["a"]), names(&["x0"]), Certificate::default()),
        wiring: Wiring::new(),
        init_vars: names(&["a"]),
    };
    let mut w = Wiring::new();
    w.insert("x0".into(), Source::Wire("x0".into()));
    let second = Iteration {
        summary: NiSummary::new("body", names(&["x0"]), names(&["x1"]), Certificate::default()),
        wiring: w,
        init_vars: Vec::new(),
    };
    let l = compose_loop("loop", &[first.clone(), second.clone()], &ctx).unwrap();
    assert_eq!(l.inputs, ctx);
    assert_eq!(l.outputs.len(), 2);
    let rules = l.certificate.rules();
    assert_eq!(rules.last(), Some(&Rule::LoopCompose));
    assert!(rules.contains(&Rule::SeqCompose));

    let bad = Iteration {
        init_vars: names(&["x9"]),
        ..second
    };
    assert_eq!(
        compose_loop("loop", &[first, bad], &ctx).unwrap_err(),
        ComposeError::LoopInit { index: 1, var: "x9".into() }
    );
}

#[test]
fn weakening_adds_passthrough_wires() {
    let src = "unshared x\nunshared z\nk <- unif\ny <- x + k\nw <- z\nreturn (y, w)\n";
    let p = load_gadget(src, &Overrides::new()).unwrap();
    let k = Kernel::build(&p, q(3), CAP).unwrap();
    let s = to_symbolic(&p, q(3)).unwrap();
    let base = NiSummary::new("pad", needed(&s, &names(&["y"])), names(&["y"]), Certificate::default());
    assert!(base.inputs.is_empty());
    let z: BTreeSet<String> = names(&["z"]).into_iter().collect();
    let wk = weaken(&base, &z);
    assert_eq!(wk.inputs, z);
    assert_eq!(wk.certificate.rules(), vec![Rule::Weakening]);
    let renamed = wk.rename(&rename_map(&[("z", "w")]));
    let outs: Vec<String> = renamed.outputs.iter().cloned().collect();
    assert!(check_io_ni(&k, &names(&["z"]), &outs).unwrap().is_verified());
    assert!(!check_io_ni(&k, &[], &outs).unwrap().is_verified());
}

fn arner(l: i64, r: i64) -> FlatProgram {
    let mut o = Overrides::new();
    o.insert(ORDER_OVERRIDE.into(), 1);
    o.insert("l".into(), l);
    o.insert("r".into(), r);
    load_gadget(entry("add_rep_noise_er").unwrap().source, &o).unwrap()
}

#[test]
fn multi_lane_composition_matches_oracle() {
    let stages = StageSummaries::new(1, 2, Engine::Hybrid).unwrap();
    for (l, r) in [(2, 1), (2, 2), (1, 3)] {
        let p = arner(l, r);
        let k = Kernel::build(&p, q(2), CAP).unwrap();
        for probes in probe_name_sets(&p, 1) {
            let c = compose_arner(&p, &probes, &stages).unwrap();
            assert!(check_io_ni(&k, &c.witness, &probes).unwrap().is_verified(), "l={l} r={r} {probes:?}");
            assert!(composed_within_sniu(&p, &c), "l={l} r={r} {probes:?}: {:?}", c.witness);
            assert_eq!(Some(c.witness.clone()), arner_formula(&p, &probes));
        }
    }
}

#[test]
fn composition_rejects_foreign_gadgets() {
    let stages = StageSummaries::new(1, 2, Engine::Symbolic).unwrap();
    let p = entry("refresh").unwrap().load(Some(1)).unwrap();
    assert!(compose_arner(&p, &names(&["C[0][1]"]), &stages).is_err());
}

#[test]
fn symbolic_engine_t_levels() {
    let run = |name: &str, prop: Property, t: usize| {
        let p = entry(name).unwrap().load(Some(t)).unwrap();
        let c = Checker::new(&p, CheckConfig::new(prop, t, 2).with_engine(Engine::Symbolic)).unwrap();
        check_t_level(&c, None, None).unwrap()
    };
    assert_eq!(run("refresh", Property::TSni, 2).status, Status::Verified);
    assert_eq!(run("sec_mult", Property::TSni, 2).status, Status::Verified);
    assert_eq!(run("mini_add_rep_noise", Property::TNiu, 2).status, Status::Verified);
    let broken = run("broken_refresh", Property::TSni, 1);
    assert_eq!(broken.status, Status::Unknown, "the symbolic engine alone cannot refute");
}
