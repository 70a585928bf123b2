//! End-to-end runs of the binary.

use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use tempfile::TempDir;

fn run(dir: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_modsynth"))
        .current_dir(dir)
        .args(args)
        .output()
        .expect("binary runs")
}

fn code(o: &Output) -> i32 {
    o.status.code().unwrap()
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

#[test]
fn solve_then_verify_dp3() {
    let dir = TempDir::new().unwrap();
    let d = dir.path();
    assert_eq!(code(&run(d, &["generate", "dp:3", "-o", "dp3.mds"])), 0);
    for mode in ["comp", "mono"] {
        let s = run(d, &["solve", "dp3.mds", "--mode", mode, "-o", mode, "--stats", "stats.json"]);
        assert_eq!(code(&s), 0, "{}", String::from_utf8_lossy(&s.stderr));
        let v = run(d, &["verify", "dp3.mds", &format!("{mode}/controllers.lts")]);
        assert_eq!(code(&v), 0, "{}", stdout(&v));
        let v = run(d, &["verify", "dp3.mds", &format!("{mode}/bundle.json")]);
        assert_eq!(code(&v), 0);
        let report: serde_json::Value = serde_json::from_str(stdout(&v).trim()).unwrap();
        assert_eq!(report["ok"], true);
    }
}

#[test]
fn unrealizable_exits_one() {
    let dir = TempDir::new().unwrap();
    let d = dir.path();
    assert_eq!(code(&run(d, &["generate", "random:3:2", "-o", "r.mds"])), 0);
    for mode in ["comp", "mono"] {
        assert_eq!(code(&run(d, &["solve", "r.mds", "--mode", mode, "-o", mode])), 1);
    }
}

#[test]
fn solving_is_deterministic() {
    let dir = TempDir::new().unwrap();
    let d = dir.path();
    run(d, &["generate", "tl:2:2", "-o", "tl.mds"]);
    run(d, &["solve", "tl.mds", "-o", "a"]);
    run(d, &["solve", "tl.mds", "-o", "b"]);
    let a = fs::read(d.join("a/controllers.lts")).unwrap();
    let b = fs::read(d.join("b/controllers.lts")).unwrap();
    assert!(!a.is_empty());
    assert_eq!(a, b);
}

#[test]
fn permissive_controller_fails_with_replayable_witness() {
    let dir = TempDir::new().unwrap();
    let d = dir.path();
    run(d, &["generate", "dp:3", "-o", "dp3.mds"]);
    fs::write(d.join("open.lts"), "lts open {\n  init s0;\n}\n").unwrap();
    let v = run(d, &["verify", "dp3.mds", "open.lts", "--witness", "w.json"]);
    assert_eq!(code(&v), 2);
    let w: serde_json::Value = serde_json::from_str(&fs::read_to_string(d.join("w.json")).unwrap()).unwrap();
    assert!(w["kind"].is_string());
    let r = run(d, &["replay", "dp3.mds", "open.lts", "w.json"]);
    assert_eq!(code(&r), 0);
    assert_eq!(stdout(&r).trim(), "reproduced");
}

#[test]
fn export_and_bad_input() {
    let dir = TempDir::new().unwrap();
    let d = dir.path();
    run(d, &["generate", "example3", "-o", "e.mds"]);
    let o = run(d, &["export", "e.mds"]);
    assert_eq!(code(&o), 0);
    assert_eq!(stdout(&o).matches("digraph").count(), 3);
    let o = run(d, &["export", "e.mds", "--format", "json"]);
    let v: serde_json::Value = serde_json::from_str(&stdout(&o)).unwrap();
    assert_eq!(v["ltss"].as_array().unwrap().len(), 3);

    fs::write(d.join("bad.mds"), "lts A {\n  init a;\n  a -nosuch-> a;\n}\n").unwrap();
    let o = run(d, &["solve", "bad.mds"]);
    assert_eq!(code(&o), 3);
    assert!(String::from_utf8_lossy(&o.stderr).contains("3:"));
    assert_eq!(code(&run(d, &["generate", "dp:0"])), 3);
}

#[test]
fn bench_emits_json_lines() {
    let dir = TempDir::new().unwrap();
    let o = run(dir.path(), &["bench", "dp:2", "example3", "--mode", "both"]);
    assert_eq!(code(&o), 0);
    let lines: Vec<serde_json::Value> = stdout(&o).lines().map(|l| serde_json::from_str(l).unwrap()).collect();
    let summaries: Vec<_> = lines.iter().filter(|l| l["kind"] == "summary").collect();
    assert_eq!(summaries.len(), 4);
    assert!(lines.iter().all(|l| l["schema_version"] == 1));
}
