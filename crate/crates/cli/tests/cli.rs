use std::path::Path;
use std::process::{Command, Output};

fn mmrelay(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_mmrelay")).args(args).output().unwrap()
}

fn stdout(o: &Output) -> String {
    String::from_utf8(o.stdout.clone()).unwrap()
}

const SMALL: &[&str] = &["--set", "n_ues=3", "--set", "n_shadow_samples=2000"];

fn with(extra: &[&str], base: &[&str]) -> Vec<String> {
    base.iter().chain(extra).map(|s| s.to_string()).collect()
}

fn run(args: Vec<String>) -> Output {
    let refs: Vec<&str> = args.iter().map(String::as_str).collect();
    mmrelay(&refs)
}

fn csv_rows(text: &str) -> Vec<Vec<String>> {
    text.lines().map(|l| l.split(',').map(str::to_string).collect()).collect()
}

#[test]
fn analyze_emits_header_and_row() {
    let out = run(with(SMALL, &["analyze"]));
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let rows = csv_rows(&stdout(&out));
    assert_eq!(rows.len(), 2);
    assert_eq!(rows[0].len(), rows[1].len());
    let col = rows[0].iter().position(|c| c == "source").unwrap();
    assert_eq!(rows[1][col], "analysis");
    let n = rows[0].iter().position(|c| c == "n_ues").unwrap();
    assert_eq!(rows[1][n], "3");
}

#[test]
fn analyze_json_is_parseable() {
    let out = run(with(SMALL, &["analyze", "--json"]));
    assert!(out.status.success());
    let v: serde_json::Value = serde_json::from_str(&stdout(&out)).unwrap();
    assert!(v["perf"]["t_aggregate"].as_f64().unwrap() > 0.0);
}

#[test]
fn bad_override_names_the_field() {
    let out = mmrelay(&["analyze", "--set", "q_uf=2"]);
    assert!(!out.status.success());
    assert!(String::from_utf8_lossy(&out.stderr).contains("q_uf"));
    let out = mmrelay(&["analyze", "--set", "bogus=1"]);
    assert!(!out.status.success());
    assert!(String::from_utf8_lossy(&out.stderr).contains("bogus"));
}

#[test]
fn config_file_and_overrides() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("scene.json");
    std::fs::write(&cfg, r#"{"n_ues": 2, "n_shadow_samples": 1000, "q_u": 0.25}"#).unwrap();
    let out = mmrelay(&["analyze", "--config", cfg.to_str().unwrap(), "--set", "q_uf=0.75"]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let rows = csv_rows(&stdout(&out));
    let get = |name: &str| rows[1][rows[0].iter().position(|c| c == name).unwrap()].clone();
    assert_eq!(get("n_ues"), "2");
    assert_eq!(get("q_u"), "0.25");
    assert_eq!(get("q_uf"), "0.75");
}

#[test]
fn table_round_trip_through_file_and_cache() {
    let dir = tempfile::tempdir().unwrap();
    let table = dir.path().join("t.csv");
    let out = run(with(SMALL, &["build-table", "--out", table.to_str().unwrap()]));
    assert!(out.status.success());
    let built = run(with(SMALL, &["analyze"]));
    let loaded = run(with(SMALL, &["analyze", "--table", table.to_str().unwrap()]));
    assert_eq!(stdout(&built), stdout(&loaded));

    let cache = dir.path().join("cache");
    let first = run(with(SMALL, &["analyze", "--cache-dir", cache.to_str().unwrap()]));
    assert!(String::from_utf8_lossy(&first.stderr).contains("built"));
    let second = run(with(SMALL, &["analyze", "--cache-dir", cache.to_str().unwrap(), "--set", "q_u=0.3"]));
    assert!(String::from_utf8_lossy(&second.stderr).contains("loaded"));
    assert!(Path::new(&cache).read_dir().unwrap().count() >= 1);
}

#[test]
fn simulate_is_deterministic() {
    let args = with(SMALL, &["simulate", "--slots", "5000", "--seed", "3"]);
    let a = run(args.clone());
    let b = run(args);
    assert!(a.status.success());
    assert_eq!(stdout(&a), stdout(&b));
    let rows = csv_rows(&stdout(&a));
    assert_eq!(rows.len(), 3);
    let physical = run(with(SMALL, &["simulate", "--slots", "2000", "--mode", "physical"]));
    assert!(physical.status.success(), "{}", String::from_utf8_lossy(&physical.stderr));
}

#[test]
fn sweep_records_failures_and_extremum() {
    let dir = tempfile::tempdir().unwrap();
    let trace = dir.path().join("best.csv");
    let out = run(with(
        SMALL,
        &[
            "sweep",
            "--axis",
            "q_u=0.1,0.2",
            "--axis",
            "q_uf=0:1:0.5",
            "--extremum",
            "max",
            "--extremum-out",
            trace.to_str().unwrap(),
            "--workers",
            "1",
        ],
    ));
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    assert_eq!(csv_rows(&stdout(&out)).len(), 1 + 6);
    let best = std::fs::read_to_string(&trace).unwrap();
    assert_eq!(best.lines().count(), 3);
    assert!(best.starts_with("q_u,best_q_uf,objective"));

    let out = run(with(SMALL, &["sweep", "--axis", "q_u=0.5,1.5"]));
    assert!(out.status.success());
    let text = stdout(&out);
    assert!(text.lines().nth(2).unwrap().contains("q_u"));
}

#[test]
fn presets_are_listed() {
    let out = mmrelay(&["sweep", "--list-presets"]);
    assert!(out.status.success());
    assert!(stdout(&out).contains("best-quf-throughput"));
}

#[test]
fn validate_passes_on_defaults() {
    let out = run(with(SMALL, &["validate"]));
    assert!(out.status.success(), "{}", stdout(&out));
    assert!(stdout(&out).lines().all(|l| l.starts_with("PASS")));
}
