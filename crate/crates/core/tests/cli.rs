//! End-to-end tests of the command-line driver on small configurations.

use relboltz::cli::{run, EXIT_INSUFFICIENT, EXIT_NUMERICAL, EXIT_OK, EXIT_USAGE};
use std::path::Path;

/// A deliberately coarse solver so that `decay` finishes in seconds.
const SMALL: &str = r#"
[solver]
n_x = 1
dt = 0.05
t_final = 0.2
[solver.assembly.grid]
radial_nodes = 8
[solver.assembly.angular]
k_min = -3
k_max = 6
[solver.assembly.fractional]
k_max = 6
"#;

fn write_config(dir: &Path, extra: &str) -> String {
    let path = dir.join("run.toml");
    std::fs::write(&path, format!("{SMALL}{extra}")).unwrap();
    path.to_str().unwrap().to_owned()
}

fn cli(args: &[&str]) -> i32 {
    run(std::iter::once("relboltz").chain(args.iter().copied()))
}

#[test]
fn exit_code_constants_are_distinct() {
    let codes = [EXIT_OK, EXIT_NUMERICAL, EXIT_USAGE, EXIT_INSUFFICIENT];
    assert_eq!(codes, [0, 1, 2, 3]);
}

#[test]
fn usage_errors_exit_with_two() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().to_str().unwrap();
    assert_eq!(cli(&["frobnicate"]), EXIT_USAGE);
    assert_eq!(cli(&["--out", out, "eval", "--subject", "z"]), EXIT_USAGE);
    assert_eq!(cli(&["--out", out, "eval", "--subject", "q", "--input", "no_such_input"]), EXIT_USAGE);
    assert_eq!(cli(&["--out", out, "--threads", "0", "moments"]), EXIT_USAGE);
    assert_eq!(cli(&["--config", "/nonexistent/run.toml", "moments"]), EXIT_USAGE);
    let bad = write_config(dir.path(), "[kernel]\ngamma = 3.0\n");
    assert_eq!(cli(&["--config", &bad, "--out", out, "moments"]), EXIT_USAGE);
    let unknown = dir.path().join("unknown.toml");
    std::fs::write(&unknown, "[kernel]\nbeta = 1.0\n").unwrap();
    assert_eq!(cli(&["--config", unknown.to_str().unwrap(), "--out", out, "moments"]), EXIT_USAGE);
    assert_eq!(cli(&["--help"]), EXIT_OK);
}

#[test]
fn moments_report_matches_reference() {
    let dir = tempfile::tempdir().unwrap();
    assert_eq!(cli(&["--out", dir.path().to_str().unwrap(), "--seed", "3", "moments"]), EXIT_OK);
    let doc: serde_json::Value = serde_json::from_slice(&std::fs::read(dir.path().join("moments.json")).unwrap()).unwrap();
    assert_eq!(doc["seed"], 3);
    assert_eq!(doc["config_hash"].as_str().unwrap().len(), 64);
    let rel = doc["relative_error"]["lambda_0"].as_f64().unwrap();
    assert!(rel < 1e-6, "λ₀ relative error {rel}");
}

#[test]
fn eval_writes_values_and_summary() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().to_str().unwrap();
    assert_eq!(cli(&["--out", out, "eval", "--subject", "l", "--input", "null:4"]), EXIT_OK);
    let doc: serde_json::Value = serde_json::from_slice(&std::fs::read(dir.path().join("eval_l.json")).unwrap()).unwrap();
    // L annihilates the energy invariant √J p⁰.
    assert!(doc["max_abs"].as_f64().unwrap() < 1e-8, "{doc}");
    let mut reader = csv::ReaderBuilder::new().comment(Some(b'#')).from_path(dir.path().join("eval_l.csv")).unwrap();
    assert_eq!(reader.headers().unwrap(), vec!["p1", "p2", "p3", "p0", "weight", "value"]);
    assert!(reader.records().count() > 0);
}

#[test]
fn zero_amplitude_decay_is_flat() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), "[initial]\namplitude = 0.0\n");
    assert_eq!(cli(&["--config", &cfg, "--out", dir.path().to_str().unwrap(), "decay"]), EXIT_OK);
    let meta: serde_json::Value = serde_json::from_slice(&std::fs::read(dir.path().join("decay_meta.json")).unwrap()).unwrap();
    assert!(meta["lambda"].is_null(), "{meta}");
    assert_eq!(meta["steps"], 4);
    assert!(dir.path().join("decay_trace.csv").exists());
}

#[test]
fn oversized_initial_data_is_refused() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), "[initial]\namplitude = 10.0\n");
    assert_eq!(cli(&["--config", &cfg, "--out", dir.path().to_str().unwrap(), "decay"]), EXIT_USAGE);
}

#[test]
fn small_decay_is_deterministic() {
    let a = tempfile::tempdir().unwrap();
    let b = tempfile::tempdir().unwrap();
    let cfg = write_config(a.path(), "");
    for dir in [&a, &b] {
        assert_eq!(cli(&["--config", &cfg, "--out", dir.path().to_str().unwrap(), "decay"]), EXIT_OK);
    }
    let read = |d: &tempfile::TempDir| std::fs::read(d.path().join("decay_trace.csv")).unwrap();
    assert_eq!(read(&a), read(&b));
}
