//! Command-line front end. [`run`] never panics on bad input; every failure
//! maps to an exit code.

use std::ffi::OsString;
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::sync::Arc;

use clap::{Parser, Subcommand, ValueEnum};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::bench::{generate, BenchSpec};
use crate::engine::{comp_synthesis, monolithic_synthesis, EngineOptions, FirstTwo, Heuristic, IterStats};
use crate::error::{Error, Result};
use crate::export::{lts_to_json, problem_to_json, to_dot};
use crate::format::{parse_controllers, parse_problem, print_controllers, print_problem};
use crate::lts::{EventId, EventTable, Lts};
use crate::problem::ControlProblem;
use crate::verify::{check_solution_bounded, replay_witness, LassoWitness, VerificationReport, Witness, DEFAULT_BUDGET};

pub const EXIT_OK: i32 = 0;
pub const EXIT_UNREALIZABLE: i32 = 1;
pub const EXIT_VERIFY_FAILED: i32 = 2;
pub const EXIT_USAGE: i32 = 3;
pub const EXIT_BUDGET: i32 = 4;

pub const BUNDLE_VERSION: u32 = 1;
pub const STATS_SCHEMA_VERSION: u32 = 1;
pub const CONTROLLERS_FILE: &str = "controllers.lts";
pub const BUNDLE_FILE: &str = "bundle.json";

#[derive(Parser, Debug)]
#[command(name = "modsynth", version, about = "Compositional GR(1) controller synthesis for modular plants")]
struct Cli {
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
enum Mode {
    Mono,
    Comp,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
enum BenchMode {
    Mono,
    Comp,
    Both,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
enum HeuristicName {
    FirstTwo,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
enum ExportFormat {
    Dot,
    Json,
}

#[derive(Subcommand, Debug)]
enum Cmd {
    /// Synthesize controllers and write them with a bundle manifest.
    Solve {
        problem: PathBuf,
        #[arg(long, value_enum, default_value = "comp")]
        mode: Mode,
        #[arg(long, value_enum, default_value = "first-two")]
        heuristic: HeuristicName,
        #[arg(long, default_value_t = DEFAULT_BUDGET)]
        budget: usize,
        /// Per-iteration statistics as JSON lines.
        #[arg(long)]
        stats: Option<PathBuf>,
        #[arg(long)]
        strict_mu: bool,
        /// Output directory.
        #[arg(short, long, default_value = "solution")]
        out: PathBuf,
    },
    /// Check controllers (an .lts file or a bundle.json) against a problem.
    Verify {
        problem: PathBuf,
        controllers: PathBuf,
        /// Where to write the counterexample, if any.
        #[arg(long)]
        witness: Option<PathBuf>,
        #[arg(long, default_value_t = DEFAULT_BUDGET)]
        budget: usize,
    },
    /// Re-execute a counterexample; exit 0 when it reproduces.
    Replay {
        problem: PathBuf,
        controllers: PathBuf,
        witness: PathBuf,
    },
    /// Run benchmark instances and print JSON-lines statistics.
    Bench {
        #[arg(required = true)]
        specs: Vec<String>,
        #[arg(long, value_enum, default_value = "both")]
        mode: BenchMode,
        #[arg(long, default_value_t = DEFAULT_BUDGET)]
        budget: usize,
        #[arg(long, default_value_t = 1)]
        jobs: usize,
    },
    /// Render a problem, or controllers of a problem, as DOT or JSON.
    Export {
        problem: PathBuf,
        #[arg(long, value_enum, default_value = "dot")]
        format: ExportFormat,
        #[arg(long)]
        controllers: Option<PathBuf>,
    },
    /// Print a benchmark problem in the text format.
    Generate {
        spec: String,
        #[arg(short, long)]
        out: Option<PathBuf>,
    },
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Bundle {
    pub version: u32,
    pub problem: String,
    pub problem_sha256: String,
    pub mode: String,
    pub verdict: String,
    pub controllers: Vec<String>,
    pub controller_names: Vec<String>,
}

/// A [`Witness`] with event names instead of ids.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum NamedWitness {
    Illegal { trace: Vec<String>, event: String },
    Deadlock { trace: Vec<String> },
    Lasso { prefix: Vec<String>, cycle: Vec<String>, violated_guarantee: usize },
}

impl NamedWitness {
    pub fn from_witness(w: &Witness, t: &EventTable) -> Self {
        let names = |v: &[EventId]| v.iter().map(|&e| t.name(e).to_string()).collect();
        match w {
            Witness::Illegal { trace, event } => NamedWitness::Illegal {
                trace: names(trace),
                event: t.name(*event).to_string(),
            },
            Witness::Deadlock { trace } => NamedWitness::Deadlock { trace: names(trace) },
            Witness::Lasso(l) => NamedWitness::Lasso {
                prefix: names(&l.prefix),
                cycle: names(&l.cycle),
                violated_guarantee: l.violated_guarantee,
            },
        }
    }

    pub fn to_witness(&self, t: &EventTable) -> Result<Witness> {
        let id = |n: &str| t.lookup(n).ok_or_else(|| Error::Usage(format!("witness names unknown event `{n}`")));
        let ids = |v: &[String]| v.iter().map(|n| id(n)).collect::<Result<Vec<_>>>();
        Ok(match self {
            NamedWitness::Illegal { trace, event } => Witness::Illegal {
                trace: ids(trace)?,
                event: id(event)?,
            },
            NamedWitness::Deadlock { trace } => Witness::Deadlock { trace: ids(trace)? },
            NamedWitness::Lasso {
                prefix,
                cycle,
                violated_guarantee,
            } => Witness::Lasso(LassoWitness {
                prefix: ids(prefix)?,
                cycle: ids(cycle)?,
                violated_guarantee: *violated_guarantee,
            }),
        })
    }
}

#[derive(Clone, Debug, Serialize)]
struct NamedReport {
    ok: bool,
    legal: bool,
    deadlock_free: bool,
    goal_holds: bool,
    witness: Option<NamedWitness>,
}

impl NamedReport {
    fn new(r: &VerificationReport, t: &EventTable) -> Self {
        Self {
            ok: r.ok(),
            legal: r.legal,
            deadlock_free: r.deadlock_free,
            goal_holds: r.goal_holds,
            witness: r.witness.as_ref().map(|w| NamedWitness::from_witness(w, t)),
        }
    }
}

#[derive(Clone, Debug, Serialize)]
struct BenchLine<'a> {
    schema_version: u32,
    bench: &'a str,
    mode: &'a str,
    kind: &'a str,
    #[serde(flatten)]
    body: serde_json::Value,
}

fn exit_code(e: &Error) -> i32 {
    match e {
        Error::Budget { .. } => EXIT_BUDGET,
        _ => EXIT_USAGE,
    }
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

fn read(path: &Path) -> Result<String> {
    fs::read_to_string(path).map_err(|e| Error::Usage(format!("{}: {e}", path.display())))
}

fn load_problem(path: &Path) -> Result<(ControlProblem, String)> {
    let text = read(path)?;
    let p = parse_problem(&text).map_err(|e| Error::Usage(format!("{}: {e}", path.display())))?;
    Ok((p, sha256_hex(text.as_bytes())))
}

/// Accepts either a controller file or a bundle manifest.
pub fn load_controllers(path: &Path, events: &Arc<EventTable>, problem_hash: &str) -> Result<Vec<Lts>> {
    let is_bundle = path.extension().is_some_and(|e| e == "json");
    if !is_bundle {
        let text = read(path)?;
        return parse_controllers(&text, events).map_err(|e| Error::Usage(format!("{}: {e}", path.display())));
    }
    let bundle: Bundle = serde_json::from_str(&read(path)?)?;
    if bundle.version != BUNDLE_VERSION {
        return Err(Error::Usage(format!("unsupported bundle version {}", bundle.version)));
    }
    if bundle.problem_sha256 != problem_hash {
        return Err(Error::Usage("bundle was produced for a different problem file".into()));
    }
    let dir = path.parent().unwrap_or(Path::new("."));
    let mut out = Vec::new();
    for f in &bundle.controllers {
        let p = dir.join(f);
        let text = read(&p)?;
        out.extend(parse_controllers(&text, events).map_err(|e| Error::Usage(format!("{}: {e}", p.display())))?);
    }
    Ok(out)
}

/// Runs the CLI on `args` (including the program name) and returns the
/// exit code.
pub fn run<I, T>(args: I, out: &mut dyn Write, err: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_USAGE } else { EXIT_OK };
            let text = e.render().to_string();
            let _ = if e.use_stderr() { err.write_all(text.as_bytes()) } else { out.write_all(text.as_bytes()) };
            return code;
        }
    };
    match dispatch(cli.cmd, out, err) {
        Ok(code) => code,
        Err(e) => {
            let _ = writeln!(err, "error: {e}");
            exit_code(&e)
        }
    }
}

fn dispatch(cmd: Cmd, out: &mut dyn Write, err: &mut dyn Write) -> Result<i32> {
    match cmd {
        Cmd::Solve {
            problem,
            mode,
            heuristic,
            budget,
            stats,
            strict_mu,
            out: dir,
        } => solve(&problem, mode, heuristic, budget, stats.as_deref(), strict_mu, &dir, out),
        Cmd::Verify {
            problem,
            controllers,
            witness,
            budget,
        } => {
            let (p, hash) = load_problem(&problem)?;
            let ctrls = load_controllers(&controllers, &p.events, &hash)?;
            let report = check_solution_bounded(&p, &ctrls, budget)?;
            let named = NamedReport::new(&report, &p.events);
            writeln!(out, "{}", serde_json::to_string(&named)?)?;
            if let (Some(path), Some(w)) = (witness, &named.witness) {
                fs::write(path, serde_json::to_string_pretty(w)?)?;
            }
            Ok(if report.ok() { EXIT_OK } else { EXIT_VERIFY_FAILED })
        }
        Cmd::Replay {
            problem,
            controllers,
            witness,
        } => {
            let (p, hash) = load_problem(&problem)?;
            let ctrls = load_controllers(&controllers, &p.events, &hash)?;
            let named: NamedWitness = serde_json::from_str(&read(&witness)?)?;
            let w = named.to_witness(&p.events)?;
            let ok = replay_witness(&p.parts, &ctrls, &p.goal, &w)?;
            writeln!(out, "{}", if ok { "reproduced" } else { "not reproduced" })?;
            Ok(if ok { EXIT_OK } else { EXIT_VERIFY_FAILED })
        }
        Cmd::Bench {
            specs,
            mode,
            budget,
            jobs,
        } => bench(&specs, mode, budget, jobs, out, err),
        Cmd::Export {
            problem,
            format,
            controllers,
        } => {
            let (p, hash) = load_problem(&problem)?;
            let text = match (controllers, format) {
                (None, ExportFormat::Dot) => p.parts.iter().map(to_dot).collect::<Vec<_>>().join("\n"),
                (None, ExportFormat::Json) => problem_to_json(&p)?,
                (Some(c), f) => {
                    let ctrls = load_controllers(&c, &p.events, &hash)?;
                    match f {
                        ExportFormat::Dot => ctrls.iter().map(to_dot).collect::<Vec<_>>().join("\n"),
                        ExportFormat::Json => {
                            let v = ctrls.iter().map(lts_to_json).collect::<serde_json::Result<Vec<_>>>()?;
                            format!("[\n{}\n]", v.join(",\n"))
                        }
                    }
                }
            };
            out.write_all(text.as_bytes())?;
            if !text.ends_with('\n') {
                writeln!(out)?;
            }
            Ok(EXIT_OK)
        }
        Cmd::Generate { spec, out: file } => {
            let spec: BenchSpec = spec.parse()?;
            let text = print_problem(&generate(spec)?);
            match file {
                Some(f) => fs::write(f, text)?,
                None => out.write_all(text.as_bytes())?,
            }
            Ok(EXIT_OK)
        }
    }
}

#[allow(clippy::too_many_arguments)]
fn solve(
    path: &Path,
    mode: Mode,
    heuristic: HeuristicName,
    budget: usize,
    stats: Option<&Path>,
    strict_mu: bool,
    dir: &Path,
    out: &mut dyn Write,
) -> Result<i32> {
    let (p, hash) = load_problem(path)?;
    let h: &dyn Heuristic = match heuristic {
        HeuristicName::FirstTwo => &FirstTwo,
    };
    let (controllers, iter_stats, mode_name) = match mode {
        Mode::Comp => {
            let opts = EngineOptions {
                budget,
                strict_mu,
                record: false,
            };
            let r = comp_synthesis(&p, h, &opts)?;
            (r.bundle.map(|b| b.controllers), r.stats, "comp")
        }
        Mode::Mono => {
            let r = monolithic_synthesis(&p, budget)?;
            let st = IterStats {
                iter: 0,
                subplant_states: r.plant_states,
                winning_states: r.winning_states,
                quotient_states: None,
                mu: 0,
                millis: r.millis,
            };
            (r.verdict.controller().map(|c| vec![c.clone()]), vec![st], "mono")
        }
    };
    fs::create_dir_all(dir)?;
    if let Some(sp) = stats {
        let mut lines = String::new();
        for s in &iter_stats {
            lines.push_str(&serde_json::to_string(s)?);
            lines.push('\n');
        }
        fs::write(sp, lines)?;
    }
    let realizable = controllers.is_some();
    let ctrls = controllers.unwrap_or_default();
    let mut files = Vec::new();
    if realizable {
        fs::write(dir.join(CONTROLLERS_FILE), print_controllers(&ctrls))?;
        files.push(CONTROLLERS_FILE.to_string());
    }
    let bundle = Bundle {
        version: BUNDLE_VERSION,
        problem: path.display().to_string(),
        problem_sha256: hash,
        mode: mode_name.into(),
        verdict: if realizable { "realizable" } else { "unrealizable" }.into(),
        controllers: files,
        controller_names: ctrls.iter().map(|c| c.name().to_string()).collect(),
    };
    fs::write(dir.join(BUNDLE_FILE), serde_json::to_string_pretty(&bundle)? + "\n")?;
    writeln!(out, "{} ({} controller(s))", bundle.verdict, ctrls.len())?;
    Ok(if realizable { EXIT_OK } else { EXIT_UNREALIZABLE })
}

fn bench_one(spec: &str, mode: BenchMode, budget: usize) -> Result<Vec<String>> {
    let parsed: BenchSpec = spec.parse()?;
    let p = generate(parsed)?;
    let mut lines = Vec::new();
    let mut line = |mode: &str, kind: &str, body: serde_json::Value| -> Result<()> {
        lines.push(serde_json::to_string(&BenchLine {
            schema_version: STATS_SCHEMA_VERSION,
            bench: spec,
            mode,
            kind,
            body,
        })?);
        Ok(())
    };
    if matches!(mode, BenchMode::Comp | BenchMode::Both) {
        let started = std::time::Instant::now();
        let r = comp_synthesis(&p, &FirstTwo, &EngineOptions { budget, ..Default::default() })?;
        for s in &r.stats {
            line("comp", "iter", serde_json::to_value(s)?)?;
        }
        line(
            "comp",
            "summary",
            serde_json::json!({
                "realizable": r.is_realizable(),
                "max_states": r.max_subplant(),
                "controllers": r.bundle.as_ref().map_or(0, |b| b.controllers.len()),
                "millis": started.elapsed().as_millis() as u64,
            }),
        )?;
    }
    if matches!(mode, BenchMode::Mono | BenchMode::Both) {
        match monolithic_synthesis(&p, budget) {
            Ok(r) => line(
                "mono",
                "summary",
                serde_json::json!({
                    "realizable": r.verdict.is_realizable(),
                    "max_states": r.plant_states,
                    "controllers": usize::from(r.verdict.is_realizable()),
                    "millis": r.millis,
                }),
            )?,
            Err(Error::Budget { .. }) => line("mono", "summary", serde_json::json!({ "budget_exceeded": true }))?,
            Err(e) => return Err(e),
        }
    }
    Ok(lines)
}

fn bench(specs: &[String], mode: BenchMode, budget: usize, jobs: usize, out: &mut dyn Write, err: &mut dyn Write) -> Result<i32> {
    for s in specs {
        s.parse::<BenchSpec>()?;
    }
    let jobs = jobs.clamp(1, specs.len().max(1));
    let mut results: Vec<Option<Result<Vec<String>>>> = (0..specs.len()).map(|_| None).collect();
    std::thread::scope(|scope| {
        let chunks: Vec<_> = results
            .chunks_mut(specs.len().div_ceil(jobs))
            .zip(specs.chunks(specs.len().div_ceil(jobs)))
            .map(|(slots, names)| {
                scope.spawn(move || {
                    for (slot, name) in slots.iter_mut().zip(names) {
                        *slot = Some(bench_one(name, mode, budget));
                    }
                })
            })
            .collect();
        for c in chunks {
            let _ = c.join();
        }
    });
    let mut code = EXIT_OK;
    for (spec, r) in specs.iter().zip(results) {
        match r {
            Some(Ok(lines)) => {
                for l in lines {
                    writeln!(out, "{l}")?;
                }
            }
            Some(Err(e)) => {
                writeln!(err, "error: {spec}: {e}")?;
                code = code.max(exit_code(&e));
            }
            None => {
                writeln!(err, "error: {spec}: worker failed")?;
                code = EXIT_USAGE;
            }
        }
    }
    Ok(code)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn run_str(args: &[&str]) -> (i32, String, String) {
        let (mut o, mut e) = (Vec::new(), Vec::new());
        let code = run(args.iter().copied(), &mut o, &mut e);
        (code, String::from_utf8(o).unwrap(), String::from_utf8(e).unwrap())
    }

    #[test]
    fn usage_errors() {
        assert_eq!(run_str(&["modsynth"]).0, EXIT_USAGE);
        assert_eq!(run_str(&["modsynth", "solve"]).0, EXIT_USAGE);
        assert_eq!(run_str(&["modsynth", "solve", "/nonexistent/x.mds"]).0, EXIT_USAGE);
        assert_eq!(run_str(&["modsynth", "generate", "dp:1"]).0, EXIT_USAGE);
        assert_eq!(run_str(&["modsynth", "--help"]).0, EXIT_OK);
    }

    #[test]
    fn generate_prints_parsable_problem() {
        let (code, text, _) = run_str(&["modsynth", "generate", "example3"]);
        assert_eq!(code, 0);
        assert_eq!(parse_problem(&text).unwrap().parts.len(), 3);
    }

    #[test]
    fn bench_lines_are_versioned() {
        let (code, text, _) = run_str(&["modsynth", "bench", "dp:2", "example3", "--jobs", "2"]);
        assert_eq!(code, 0);
        let lines: Vec<serde_json::Value> = text.lines().map(|l| serde_json::from_str(l).unwrap()).collect();
        assert!(lines.iter().all(|l| l["schema_version"] == STATS_SCHEMA_VERSION));
        assert_eq!(lines.iter().filter(|l| l["kind"] == "summary").count(), 4);
        assert_eq!(lines[0]["bench"], "dp:2");
    }

    #[test]
    fn witness_names_round_trip() {
        let p = generate(BenchSpec::Example3).unwrap();
        let t = &p.events;
        let w = Witness::Lasso(LassoWitness {
            prefix: vec![t.lookup("c1").unwrap()],
            cycle: vec![t.lookup("u2").unwrap(), t.lookup("c2").unwrap()],
            violated_guarantee: 1,
        });
        let named = NamedWitness::from_witness(&w, t);
        let json = serde_json::to_string(&named).unwrap();
        assert!(json.contains("\"u2\""));
        let back: NamedWitness = serde_json::from_str(&json).unwrap();
        assert_eq!(back.to_witness(t).unwrap(), w);
    }
}
