use std::fs;
use std::process::{Command, Output};

use serde_json::Value;

fn bin() -> Command {
    let mut c = Command::new(env!("CARGO_BIN_EXE_trigroots"));
    // keep the caller's environment from leaking settings in
    for (k, _) in std::env::vars() {
        if k.starts_with("TRIGROOTS_") {
            c.env_remove(k);
        }
    }
    c
}

fn run(args: &[&str]) -> Output {
    bin().args(args).output().expect("spawn")
}

fn json(out: &Output) -> Value {
    serde_json::from_slice(&out.stdout).expect("json output")
}

#[test]
fn count_is_byte_identical() {
    let a = run(&["count", "--n", "30", "--seed", "5", "--trial", "2"]);
    let b = run(&["count", "--n", "30", "--seed", "5", "--trial", "2"]);
    assert!(a.status.success());
    assert_eq!(a.stdout, b.stdout);
    let v = json(&a);
    assert_eq!(v["result"]["certified"], Value::Bool(true));
    assert_eq!(v["header"]["config"]["n"], "30");
}

#[test]
fn verify_passes() {
    let out = run(&["verify", "--suite", "bernstein,sieve,charproduct", "--trials", "20"]);
    assert_eq!(out.status.code(), Some(0));
    let text = String::from_utf8(out.stdout).unwrap();
    assert!(text.contains("bernstein,20,20,0,0"), "{text}");
}

#[test]
fn flag_beats_env_beats_config() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("run.conf");
    fs::write(&cfg, "# settings\nn = 12\nseed = 1\nensemble = rademacher\n").unwrap();
    let out = bin()
        .args(["--config", cfg.to_str().unwrap(), "count", "--n", "16"])
        .env("TRIGROOTS_SEED", "9")
        .output()
        .unwrap();
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let h = &json(&out)["header"];
    assert_eq!(h["config"]["n"], "16");
    assert_eq!(h["config"]["seed"], "9");
    assert_eq!(h["config"]["ensemble"], "rademacher");
    assert_eq!(h["sources"]["n"], "flag");
    assert_eq!(h["sources"]["seed"], "env");
    assert_eq!(h["sources"]["ensemble"], "config");
    let conflicts = h["conflicts"].as_array().unwrap();
    let n = conflicts.iter().find(|c| c["key"] == "n").unwrap();
    assert_eq!(n["value"], "16");
    assert_eq!(n["overridden"][0]["value"], "12");
    assert_eq!(n["overridden"][0]["source"], "config");
    let seed = conflicts.iter().find(|c| c["key"] == "seed").unwrap();
    assert_eq!(seed["source"], "env");
    assert_eq!(seed["overridden"][0]["value"], "1");
}

#[test]
fn exit_codes() {
    assert_eq!(run(&["count", "--n", "5", "--no-such-flag", "1"]).status.code(), Some(1));
    assert_eq!(run(&["count", "--n", "5", "--ensemble", "cauchy"]).status.code(), Some(1));
    assert_eq!(run(&["count"]).status.code(), Some(1));
    assert_eq!(run(&["--help"]).status.code(), Some(0));
    assert_eq!(run(&["--version"]).status.code(), Some(0));
    let missing = run(&["report", "--input", "/definitely/not/here.jsonl"]);
    assert_eq!(missing.status.code(), Some(2));
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("bad.conf");
    fs::write(&cfg, "colour = blue\n").unwrap();
    let out = run(&["--config", cfg.to_str().unwrap(), "count", "--n", "5"]);
    assert_eq!(out.status.code(), Some(1));
}

#[test]
fn sweep_record_matches_count() {
    let sweep = run(&["sweep", "--n", "40", "--trials", "4", "--seed", "11"]);
    assert!(sweep.status.success());
    let text = String::from_utf8(sweep.stdout).unwrap();
    let lines: Vec<Value> = text.lines().map(|l| serde_json::from_str(l).unwrap()).collect();
    assert!(lines[0].get("header").is_some());
    for rec in &lines[1..] {
        let i = rec["trial_index"].as_u64().unwrap().to_string();
        let c = json(&run(&["count", "--n", "40", "--seed", "11", "--trial", &i]));
        assert_eq!(rec["count"], c["result"]["count"]);
        assert_eq!(rec["certified"], c["result"]["certified"]);
    }
}

#[test]
fn sweep_output_ignores_thread_count() {
    let a = run(&["sweep", "--n", "24", "--trials", "300", "--threads", "1"]);
    let b = run(&["sweep", "--n", "24", "--trials", "300", "--threads", "3"]);
    assert!(a.status.success() && b.status.success());
    assert_eq!(a.stdout, b.stdout);
}

#[test]
fn resume_completes_a_torn_file() {
    let dir = tempfile::tempdir().unwrap();
    let full = dir.path().join("full.jsonl");
    let part = dir.path().join("part.jsonl");
    let args = ["sweep", "--n", "16,20", "--trials", "300", "--seed", "3"];
    let out = bin().args(args).args(["--output", full.to_str().unwrap()]).output().unwrap();
    assert!(out.status.success());
    let bytes = fs::read(&full).unwrap();
    // cut mid-record
    fs::write(&part, &bytes[..bytes.len() * 2 / 3 + 7]).unwrap();
    let out = bin()
        .args(args)
        .args(["--output", part.to_str().unwrap(), "--resume"])
        .output()
        .unwrap();
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    assert_eq!(fs::read(&part).unwrap(), bytes);

    let other = run(&["sweep", "--n", "16", "--trials", "300", "--seed", "4", "--resume", "--output", part.to_str().unwrap()]);
    assert_eq!(other.status.code(), Some(1));
    assert_eq!(fs::read(&part).unwrap(), bytes);
}

#[test]
fn report_reads_sweep_output() {
    let dir = tempfile::tempdir().unwrap();
    let f = dir.path().join("s.jsonl");
    let out = run(&["sweep", "--n", "20", "--trials", "40", "--output", f.to_str().unwrap()]);
    assert!(out.status.success());
    let rep = run(&["report", "--input", f.to_str().unwrap()]);
    assert!(rep.status.success());
    let text = String::from_utf8(rep.stdout).unwrap();
    let row = text.lines().find(|l| l.starts_with("gaussian,20,")).expect("summary row");
    assert_eq!(row.split(',').nth(3), Some("40"));
    let tails = run(&["tails", "--input", f.to_str().unwrap(), "--eps", "0.1"]);
    assert!(tails.status.success());
}

#[test]
fn sample_round_trips_through_count() {
    let dir = tempfile::tempdir().unwrap();
    let f = dir.path().join("p.csv");
    let s = run(&["sample", "--n", "25", "--seed", "8", "--trial", "3"]);
    assert!(s.status.success());
    fs::write(&f, &s.stdout).unwrap();
    let from_file = json(&run(&["count", "--input", f.to_str().unwrap()]));
    let direct = json(&run(&["count", "--n", "25", "--seed", "8", "--trial", "3"]));
    assert_eq!(from_file["results"][0]["count"], direct["result"]["count"]);
    assert_eq!(from_file["results"][0]["roots"], direct["result"]["roots"]);
}
