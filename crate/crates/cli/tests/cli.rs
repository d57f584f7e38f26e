use std::path::Path;
use std::process::{Command, Output};

fn fudge(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_fudge")).args(args).output().unwrap()
}

fn s(p: &Path) -> String {
    p.to_string_lossy().into_owned()
}

fn simulate(dir: &Path, seed: &str) {
    let out = fudge(&[
        "simulate", "--model", "tri-block", "--p", "10", "--n", "30", "--seed", seed, "--grid-len", "40", "--out", &s(dir),
    ]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
}

fn line_count(path: &Path) -> usize {
    std::fs::read_to_string(path).unwrap().lines().count()
}

#[test]
fn simulate_rejects_small_p_without_writing() {
    let tmp = tempfile::tempdir().unwrap();
    let dir = tmp.path().join("sim");
    let out = fudge(&["simulate", "--model", "tri-block", "--p", "7", "--n", "20", "--out", &s(&dir)]);
    assert_eq!(out.status.code(), Some(2));
    assert!(!dir.exists());
}

#[test]
fn unknown_config_key_is_a_validation_error() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = tmp.path().join("c.json");
    std::fs::write(&cfg, r#"{"model": "tri-block", "p": 10, "n": 20, "sead": 3}"#).unwrap();
    let out = fudge(&["simulate", "--config", &s(&cfg), "--out", &s(&tmp.path().join("o"))]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("sead"));
}

#[test]
fn zero_jobs_is_rejected() {
    let tmp = tempfile::tempdir().unwrap();
    let out = fudge(&["--jobs", "0", "simulate", "--out", &s(tmp.path())]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn identical_panels_give_no_edges() {
    let tmp = tempfile::tempdir().unwrap();
    let sim = tmp.path().join("sim");
    simulate(&sim, "3");
    let est = tmp.path().join("est");
    let x = s(&sim.join("x.csv"));
    let out = fudge(&["estimate", "--x", &x, "--y", &x, "--l", "10", "--m", "2", "--out", &s(&est)]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    for entry in std::fs::read_dir(&est).unwrap() {
        let path = entry.unwrap().path();
        let name = path.file_name().unwrap().to_string_lossy().into_owned();
        if name.starts_with("edges_") && name.ends_with(".csv") {
            assert_eq!(line_count(&path), 1, "{name} should hold only the header");
        }
    }
}

#[test]
fn penalty_at_lambda_max_gives_no_edges() {
    let tmp = tempfile::tempdir().unwrap();
    let sim = tmp.path().join("sim");
    simulate(&sim, "4");
    let first = tmp.path().join("first");
    let (x, y) = (s(&sim.join("x.csv")), s(&sim.join("y.csv")));
    let base = ["estimate", "--x", &x, "--y", &y, "--l", "10", "--m", "2"];
    let out = fudge(&[&base[..], &["--out", &s(&first)]].concat());
    assert!(out.status.success());
    let sel: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(first.join("selection.json")).unwrap()).unwrap();
    let lambda_max = sel["lambda_max"].as_f64().unwrap();
    let second = tmp.path().join("second");
    let lam = format!("{}", lambda_max * 1.000001);
    let out = fudge(&[&base[..], &["--lambdas", &lam, "--out", &s(&second)]].concat());
    assert!(out.status.success());
    assert_eq!(line_count(&second.join("edges_001.csv")), 1);
    assert!(!second.join("edges_002.csv").exists());
}

#[test]
fn evaluate_fudge_only_writes_single_method() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = tmp.path().join("e.json");
    std::fs::write(
        &cfg,
        r#"{"model": "tri-block", "p": 10, "n": 30, "replicates": 2, "seed": 9, "grid_len": 40,
            "estimate": {"smoothing": {"fixed": 10}, "truncation": {"fixed": 2},
                         "lambdas": {"auto": {"count": 6, "ratio": 0.05}}}}"#,
    )
    .unwrap();
    let out_dir = tmp.path().join("eval");
    let out = fudge(&["evaluate", "--config", &s(&cfg), "--methods", "fudge", "--out", &s(&out_dir)]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let agg = std::fs::read_to_string(out_dir.join("aggregate.csv")).unwrap();
    assert!(agg.contains(",fudge,"));
    assert!(!agg.contains(",multiple,"));
    assert!(out_dir.join("manifest.json").exists());
    assert_eq!(line_count(&out_dir.join("replicates.csv")), 3);
}

#[test]
fn theory_reports_constants() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = tmp.path().join("t.json");
    std::fs::write(
        &cfg,
        r#"{"n": 1000, "p": 30, "M": 3, "s": 4, "beta": 2.0, "sigma_max": 0.1, "lambda_min": 40.0,
            "delta_l1": 0.5, "nu": 0.0001, "tau": 5.0}"#,
    )
    .unwrap();
    let report = tmp.path().join("r.json");
    let out = fudge(&["theory", "--config", &s(&cfg), "--out", &s(&report)]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let v: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap();
    assert!(v["constants"]["delta"].as_f64().unwrap() > 0.0);
    assert!(v["conditions"].is_object());
    assert_eq!(std::fs::read(&report).unwrap(), [out.stdout.as_slice()].concat());
}
