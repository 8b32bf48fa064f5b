use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use maskcheck::check::{
    check_io, check_t_level, with_jobs, CheckConfig, Checker, Engine, Property, UnsharedBound,
};
use maskcheck::corpus::{corpus_verify, entries, verify_entry};
use maskcheck::dsl::{load_gadget, parse_gadget_with, pretty, FlatProgram, Overrides, ORDER_OVERRIDE};
use maskcheck::report;
use maskcheck::semantics::DEFAULT_CAP;

const EXIT_USAGE: u8 = 3;

#[derive(Parser)]
#[command(name = "maskcheck", version, about = "Probing-security checker for masked gadgets")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Check a probing property over every probe set.
    Check(CheckArgs),
    /// Decide (I, O)-NI for one input set and one probe set by enumeration.
    OracleCi(OracleArgs),
    /// Run the bundled gadgets against their expected properties.
    Corpus(CorpusArgs),
    /// Print gadget sources in canonical form.
    Fmt(FmtArgs),
}

#[derive(Clone, Copy, ValueEnum)]
enum PropertyArg {
    IoNi,
    TNi,
    TSni,
    TNiu,
    TSniu,
}

impl From<PropertyArg> for Property {
    fn from(p: PropertyArg) -> Self {
        match p {
            PropertyArg::IoNi => Property::IoNi,
            PropertyArg::TNi => Property::TNi,
            PropertyArg::TSni => Property::TSni,
            PropertyArg::TNiu => Property::TNiu,
            PropertyArg::TSniu => Property::TSniu,
        }
    }
}

#[derive(Clone, Copy, ValueEnum)]
enum EngineArg {
    Oracle,
    Symbolic,
    Hybrid,
}

impl From<EngineArg> for Engine {
    fn from(e: EngineArg) -> Self {
        match e {
            EngineArg::Oracle => Engine::Oracle,
            EngineArg::Symbolic => Engine::Symbolic,
            EngineArg::Hybrid => Engine::Hybrid,
        }
    }
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Format {
    Human,
    Json,
}

#[derive(Clone, Copy, ValueEnum)]
enum UnsharedArg {
    Internal,
    All,
}

#[derive(Args)]
struct Common {
    /// Masking order; replaces the gadget's `order` value.
    #[arg(long)]
    t: Option<usize>,
    /// Ring modulus.
    #[arg(long, default_value_t = 2)]
    q: u32,
    /// Cap on input assignments times random samples.
    #[arg(long, default_value_t = DEFAULT_CAP)]
    cap: u64,
    #[arg(long, value_enum, default_value_t = Format::Human)]
    format: Format,
    /// Parameter override, `name=value`.
    #[arg(long = "param", value_parser = parse_param)]
    params: Vec<(String, i64)>,
    /// Write the report here instead of standard output.
    #[arg(long)]
    output: Option<PathBuf>,
}

#[derive(Args)]
struct CheckArgs {
    file: PathBuf,
    #[arg(long, value_enum, default_value_t = PropertyArg::TNi)]
    property: PropertyArg,
    #[arg(long, value_enum, default_value_t = EngineArg::Hybrid)]
    engine: EngineArg,
    /// Worker threads; 0 uses all cores.
    #[arg(long, env = "MASKCHECK_JOBS", default_value_t = 0)]
    jobs: usize,
    /// Largest number of probe sets to examine.
    #[arg(long, default_value_t = 1 << 20)]
    probe_cap: u64,
    /// Resume from and append to this file.
    #[arg(long)]
    checkpoint: Option<PathBuf>,
    /// What the unshared allowance of t-sniu counts.
    #[arg(long, value_enum, default_value_t = UnsharedArg::Internal)]
    unshared_bound: UnsharedArg,
    /// Accept any invertible coefficient in bijection rewrites.
    #[arg(long)]
    unit_coefficients: bool,
    /// Inputs of an io-ni query, comma separated.
    #[arg(long, value_delimiter = ',')]
    inputs: Vec<String>,
    /// Probes of an io-ni query, comma separated.
    #[arg(long, value_delimiter = ',')]
    probes: Vec<String>,
    #[command(flatten)]
    common: Common,
}

#[derive(Args)]
struct OracleArgs {
    file: PathBuf,
    #[arg(long, value_delimiter = ',')]
    inputs: Vec<String>,
    #[arg(long, value_delimiter = ',', required = true)]
    probes: Vec<String>,
    #[command(flatten)]
    common: Common,
}

#[derive(Args)]
struct CorpusArgs {
    /// Only this entry.
    #[arg(long)]
    name: Option<String>,
    #[arg(long, value_enum, default_value_t = EngineArg::Hybrid)]
    engine: EngineArg,
    #[arg(long, env = "MASKCHECK_JOBS", default_value_t = 0)]
    jobs: usize,
    #[arg(long, default_value_t = DEFAULT_CAP)]
    cap: u64,
    #[arg(long, value_enum, default_value_t = Format::Human)]
    format: Format,
}

#[derive(Args)]
struct FmtArgs {
    files: Vec<PathBuf>,
    /// Exit with status 1 when a file is not in canonical form.
    #[arg(long)]
    check: bool,
    /// Rewrite files in place.
    #[arg(long, conflicts_with = "check")]
    in_place: bool,
}

fn parse_param(s: &str) -> Result<(String, i64), String> {
    let (k, v) = s.split_once('=').ok_or("expected name=value")?;
    let v = v.trim().parse().map_err(|e| format!("bad value: {e}"))?;
    Ok((k.trim().to_string(), v))
}

struct Failure(u8, String);

impl Failure {
    fn usage(msg: impl Into<String>) -> Self {
        Failure(EXIT_USAGE, msg.into())
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_USAGE } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    let result = match cli.command {
        Command::Check(a) => run_check(a),
        Command::OracleCi(a) => run_oracle(a),
        Command::Corpus(a) => run_corpus(a),
        Command::Fmt(a) => run_fmt(a),
    };
    match result {
        Ok(code) => ExitCode::from(code),
        Err(Failure(code, msg)) => {
            eprintln!("maskcheck: {msg}");
            ExitCode::from(code)
        }
    }
}

fn read(path: &Path) -> Result<String, Failure> {
    fs::read_to_string(path).map_err(|e| Failure::usage(format!("{}: {e}", path.display())))
}

fn load(path: &Path, common: &Common) -> Result<FlatProgram, Failure> {
    let src = read(path)?;
    let mut ov: Overrides = common.params.iter().cloned().collect();
    if let Some(t) = common.t {
        ov.insert(ORDER_OVERRIDE.into(), t as i64);
    }
    load_gadget(&src, &ov).map_err(|e| Failure::usage(format!("{}:{e}", path.display())))
}

fn timestamp() -> String {
    chrono::Utc::now().to_rfc3339_opts(chrono::SecondsFormat::Secs, true)
}

fn emit(text: String, output: Option<&Path>) -> Result<(), Failure> {
    match output {
        Some(p) => fs::write(p, text).map_err(|e| Failure::usage(format!("{}: {e}", p.display()))),
        None => {
            print!("{text}");
            Ok(())
        }
    }
}

fn json_text(v: &serde_json::Value) -> String {
    let mut s = serde_json::to_string_pretty(v).expect("report serializes");
    s.push('\n');
    s
}

fn config(program: &FlatProgram, property: Property, engine: Engine, common: &Common) -> Result<CheckConfig, Failure> {
    if common.q < 2 {
        return Err(Failure::usage(format!("--q must be at least 2, got {}", common.q)));
    }
    if common.cap == 0 {
        return Err(Failure::usage("--cap must be positive"));
    }
    let t = common.t.unwrap_or_else(|| program.order());
    let mut cfg = CheckConfig::new(property, t, common.q).with_engine(engine);
    cfg.cap = common.cap;
    Ok(cfg)
}

fn run_check(a: CheckArgs) -> Result<u8, Failure> {
    let program = load(&a.file, &a.common)?;
    let property = Property::from(a.property);
    let mut cfg = config(&program, property, a.engine.into(), &a.common)?;
    if a.probe_cap == 0 {
        return Err(Failure::usage("--probe-cap must be positive"));
    }
    cfg.probe_cap = a.probe_cap;
    cfg.unshared_bound = match a.unshared_bound {
        UnsharedArg::Internal => UnsharedBound::Internal,
        UnsharedArg::All => UnsharedBound::All,
    };
    cfg.unit_coefficients = a.unit_coefficients;
    let checker = Checker::new(&program, cfg.clone()).map_err(|e| Failure::usage(e.to_string()))?;
    if property == Property::IoNi {
        if a.probes.is_empty() {
            return Err(Failure::usage("--property io-ni needs --probes"));
        }
        return io_query(&checker, &program, &cfg, &a.inputs, &a.probes, &a.common);
    }
    let fp = report::fingerprint(&program, &cfg, "");
    let verdict = with_jobs(a.jobs, || {
        check_t_level(&checker, None, a.checkpoint.as_deref().map(|p| (p, fp.as_str())))
    })
    .map_err(|e| Failure::usage(e.to_string()))?;
    let text = match a.common.format {
        Format::Json => json_text(&report::t_level_json(&program, &cfg, &verdict, &timestamp())),
        Format::Human => report::t_level_human(&program, &cfg, &verdict),
    };
    emit(text, a.common.output.as_deref())?;
    Ok(verdict.status.exit_code() as u8)
}

fn io_query(
    checker: &Checker,
    program: &FlatProgram,
    cfg: &CheckConfig,
    inputs: &[String],
    probes: &[String],
    common: &Common,
) -> Result<u8, Failure> {
    let out = check_io(checker, inputs, probes).map_err(|e| Failure::usage(e.to_string()))?;
    let text = match common.format {
        Format::Json => json_text(&report::io_json(program, cfg, &out, &timestamp())),
        Format::Human => report::io_human(program, &out),
    };
    emit(text, common.output.as_deref())?;
    Ok(out.status.exit_code() as u8)
}

fn run_oracle(a: OracleArgs) -> Result<u8, Failure> {
    let program = load(&a.file, &a.common)?;
    let cfg = config(&program, Property::IoNi, Engine::Oracle, &a.common)?;
    let checker = Checker::new(&program, cfg.clone()).map_err(|e| Failure::usage(e.to_string()))?;
    io_query(&checker, &program, &cfg, &a.inputs, &a.probes, &a.common)
}

fn run_corpus(a: CorpusArgs) -> Result<u8, Failure> {
    let engine = Engine::from(a.engine);
    let results = with_jobs(a.jobs, || match &a.name {
        Some(n) => entries()
            .iter()
            .filter(|e| e.name == n)
            .map(|e| verify_entry(e, engine, a.cap))
            .collect::<Vec<_>>(),
        None => corpus_verify(engine, a.cap),
    });
    if results.is_empty() {
        return Err(Failure::usage("no such corpus entry"));
    }
    let all = results.iter().all(|r| r.passed);
    let text = match a.format {
        Format::Json => json_text(&serde_json::json!({
            "schema_version": report::SCHEMA_VERSION,
            report::TIMESTAMP_FIELD: timestamp(),
            "entries": results,
            "passed": all,
        })),
        Format::Human => {
            let mut s = String::new();
            for r in &results {
                s.push_str(&format!(
                    "{:<20} {:<28} {:<9} {:>4} sets  formula mismatches {}  {}\n",
                    r.name,
                    r.expected,
                    r.status.label(),
                    r.probe_sets,
                    r.formula_mismatches.len(),
                    if r.passed { "ok" } else { "FAIL" }
                ));
                if let Some(e) = &r.error {
                    s.push_str(&format!("  error: {e}\n"));
                }
            }
            s
        }
    };
    print!("{text}");
    Ok(if all { 0 } else { 1 })
}

fn run_fmt(a: FmtArgs) -> Result<u8, Failure> {
    if a.files.is_empty() {
        return Err(Failure::usage("no input files"));
    }
    let mut differs = false;
    for f in &a.files {
        let src = read(f)?;
        let prog = parse_gadget_with(&src, &Overrides::new())
            .map_err(|e| Failure::usage(format!("{}:{e}", f.display())))?;
        let out = pretty(&prog);
        if a.check {
            if out != src {
                differs = true;
                eprintln!("{} is not in canonical form", f.display());
            }
        } else if a.in_place {
            if out != src {
                fs::write(f, &out).map_err(|e| Failure::usage(format!("{}: {e}", f.display())))?;
            }
        } else {
            print!("{out}");
        }
    }
    Ok(u8::from(differs))
}
