use std::fs;
use std::path::PathBuf;
use std::process::{Command, Output};

fn corpus(name: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR"))
        .join("../core/corpus")
        .join(format!("{name}.gdl"))
}

fn maskcheck(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_maskcheck"))
        .args(args)
        .env_remove("MASKCHECK_JOBS")
        .output()
        .expect("binary runs")
}

fn code(o: &Output) -> i32 {
    o.status.code().expect("exit code")
}

fn stdout(o: &Output) -> String {
    String::from_utf8(o.stdout.clone()).unwrap()
}

fn json(o: &Output) -> serde_json::Value {
    serde_json::from_slice(&o.stdout).expect("json report")
}

fn check(name: &str, extra: &[&str]) -> Output {
    let f = corpus(name);
    let mut args = vec!["check", f.to_str().unwrap()];
    args.extend_from_slice(extra);
    maskcheck(&args)
}

#[test]
fn verified_exits_zero() {
    let o = check("refresh", &["--property", "t-sni", "--t", "2", "--q", "2"]);
    assert_eq!(code(&o), 0, "{}", stdout(&o));
    assert!(stdout(&o).contains("result: verified"));
}

#[test]
fn refuted_exits_one_with_counterexample() {
    let o = check("broken_refresh", &["--property", "t-sni", "--t", "1"]);
    assert_eq!(code(&o), 1);
    assert!(stdout(&o).contains("counterexample for {C[0][1]}"), "{}", stdout(&o));
}

#[test]
fn undecided_exits_two() {
    let o = check("broken_refresh", &["--property", "t-sni", "--t", "1", "--engine", "symbolic"]);
    assert_eq!(code(&o), 2);
    let o = check("sec_mult", &["--property", "t-sni", "--engine", "oracle", "--cap", "4"]);
    assert_eq!(code(&o), 2);
}

#[test]
fn usage_and_parse_errors_exit_three() {
    assert_eq!(code(&maskcheck(&[])), 3);
    assert_eq!(code(&maskcheck(&["check"])), 3);
    assert_eq!(code(&check("refresh", &["--property", "nope"])), 3);
    assert_eq!(code(&check("refresh", &["--q", "1"])), 3);
    assert_eq!(code(&maskcheck(&["check", "/does/not/exist.gdl"])), 3);
    let dir = tempfile::tempdir().unwrap();
    let bad = dir.path().join("bad.gdl");
    fs::write(&bad, "unshared a\nx <- a +\nreturn x\n").unwrap();
    let o = maskcheck(&["check", bad.to_str().unwrap()]);
    assert_eq!(code(&o), 3);
    assert!(String::from_utf8_lossy(&o.stderr).contains("bad.gdl:3:1: syntax error"), "position in message");
    assert_eq!(code(&check("refresh", &["--property", "io-ni"])), 3);
    assert_eq!(code(&maskcheck(&["--help"])), 0);
}

#[test]
fn order_zero_has_only_the_empty_probe_set() {
    let o = check("refresh", &["--t", "0", "--format", "json"]);
    assert_eq!(code(&o), 0);
    let r = json(&o);
    assert_eq!(r["summary"]["probe_sets_total"], "1");
    assert_eq!(r["gadget"]["order"], 0);
}

#[test]
fn order_flag_resizes_the_gadget() {
    let r = json(&check("refresh", &["--t", "3", "--format", "json"]));
    assert_eq!(r["gadget"]["inputs"].as_array().unwrap().len(), 4);
    assert_eq!(r["config"]["t"], 3);
    let r = json(&check("masked_add", &["--t", "2", "--format", "json"]));
    assert_eq!(r["gadget"]["outputs"].as_array().unwrap().len(), 3);
}

#[test]
fn params_override_gadget_parameters() {
    let r = json(&check("add_rep_noise_er", &["--property", "t-sniu", "--param", "l=2", "--param", "r=1", "--format", "json"]));
    assert_eq!(r["status"], "verified");
    assert_eq!(r["gadget"]["inputs"].as_array().unwrap().len(), 8);
}

fn without_timestamp(mut v: serde_json::Value) -> String {
    v.as_object_mut().unwrap().remove("generated_at");
    serde_json::to_string(&v).unwrap()
}

#[test]
fn json_is_identical_across_jobs() {
    let args = ["--property", "t-sni", "--t", "2", "--format", "json"];
    let one = check("sec_mult", &[&args[..], &["--jobs", "1"]].concat());
    let many = check("sec_mult", &[&args[..], &["--jobs", "8"]].concat());
    assert_eq!(code(&one), 0);
    assert_eq!(without_timestamp(json(&one)), without_timestamp(json(&many)));
    assert!(json(&one)["generated_at"].is_string());
}

#[test]
fn jobs_fall_back_to_environment() {
    let f = corpus("refresh");
    let base = [
        "check",
        f.to_str().unwrap(),
        "--property",
        "t-sni",
        "--format",
        "json",
    ];
    let env = Command::new(env!("CARGO_BIN_EXE_maskcheck"))
        .args(base)
        .env("MASKCHECK_JOBS", "3")
        .output()
        .unwrap();
    assert_eq!(code(&env), 0);
    let bad = Command::new(env!("CARGO_BIN_EXE_maskcheck"))
        .args(base)
        .env("MASKCHECK_JOBS", "many")
        .output()
        .unwrap();
    assert_eq!(code(&bad), 3);
    assert_eq!(without_timestamp(json(&env)), without_timestamp(json(&maskcheck(&base))));
}

#[test]
fn checkpoint_resume() {
    let dir = tempfile::tempdir().unwrap();
    let ck = dir.path().join("sec.ckpt");
    let args = ["--property", "t-sni", "--t", "2", "--format", "json", "--checkpoint", ck.to_str().unwrap()];
    let first = check("sec_mult", &args);
    assert_eq!(code(&first), 0);
    let text = fs::read_to_string(&ck).unwrap();
    let lines: Vec<&str> = text.lines().collect();
    fs::write(&ck, lines[..lines.len() / 2].join("\n") + "\n").unwrap();
    let resumed = check("sec_mult", &args);
    assert_eq!(code(&resumed), 0);
    assert_eq!(without_timestamp(json(&first)), without_timestamp(json(&resumed)));
    let other = check("sec_mult", &["--property", "t-ni", "--t", "2", "--checkpoint", ck.to_str().unwrap()]);
    assert_eq!(code(&other), 3, "checkpoint of another run is rejected");
}

#[test]
fn io_queries() {
    let f = corpus("masked_add");
    let f = f.to_str().unwrap();
    let o = maskcheck(&["oracle-ci", f, "--inputs", "A[0],B[0]", "--probes", "C[0]"]);
    assert_eq!(code(&o), 0, "{}", stdout(&o));
    let o = maskcheck(&["oracle-ci", f, "--inputs", "A[0]", "--probes", "C[0]", "--format", "json"]);
    assert_eq!(code(&o), 1);
    let r = json(&o);
    assert_eq!(r["query"]["status"], "refuted");
    assert!(r["query"]["counterexample"]["left"].is_object());
    let o = maskcheck(&["oracle-ci", f, "--probes", "Z"]);
    assert_eq!(code(&o), 3);
    let o = maskcheck(&["check", f, "--property", "io-ni", "--inputs", "A[0],B[0]", "--probes", "C[0]"]);
    assert_eq!(code(&o), 0);
}

#[test]
fn corpus_command() {
    let o = maskcheck(&["corpus"]);
    assert_eq!(code(&o), 0, "{}", stdout(&o));
    assert_eq!(stdout(&o).lines().count(), 8);
    let o = maskcheck(&["corpus", "--name", "sec_mult", "--format", "json"]);
    assert_eq!(code(&o), 0);
    assert_eq!(json(&o)["entries"].as_array().unwrap().len(), 1);
    assert_eq!(code(&maskcheck(&["corpus", "--name", "nothing"])), 3);
}

#[test]
fn fmt_check_accepts_the_corpus() {
    let dir = PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../core/corpus");
    let mut files: Vec<String> = fs::read_dir(&dir)
        .unwrap()
        .map(|e| e.unwrap().path().to_string_lossy().into_owned())
        .filter(|p| p.ends_with(".gdl"))
        .collect();
    files.sort();
    assert_eq!(files.len(), 8);
    let mut args = vec!["fmt", "--check"];
    args.extend(files.iter().map(String::as_str));
    assert_eq!(code(&maskcheck(&args)), 0);
}

#[test]
fn fmt_rewrites_non_canonical_sources() {
    let dir = tempfile::tempdir().unwrap();
    let f = dir.path().join("g.gdl");
    fs::write(&f, "unshared a\nunshared b\nx<-a+(b)\nreturn   x\n").unwrap();
    let p = f.to_str().unwrap();
    assert_eq!(code(&maskcheck(&["fmt", "--check", p])), 1);
    let o = maskcheck(&["fmt", p]);
    assert_eq!(stdout(&o), "unshared a\nunshared b\n\nx <- a + b\nreturn x\n");
    assert_eq!(code(&maskcheck(&["fmt", "--in-place", p])), 0);
    assert_eq!(code(&maskcheck(&["fmt", "--check", p])), 0);
}

#[test]
fn report_written_to_file() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("r.json");
    let o = check("mini_add_rep_noise", &["--property", "t-niu", "--format", "json", "--output", out.to_str().unwrap()]);
    assert_eq!(code(&o), 0);
    assert!(o.stdout.is_empty());
    let r: serde_json::Value = serde_json::from_str(&fs::read_to_string(out).unwrap()).unwrap();
    assert_eq!(r["schema_version"], "1.0.0");
    assert_eq!(r["exit_code"], 0);
}
