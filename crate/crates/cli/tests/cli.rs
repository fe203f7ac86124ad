use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use reptest_cli::results::read_records;
use reptest_cli::Aggregate;
use serde_json::{json, Value};

fn reptest(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_reptest")).args(args).output().expect("binary runs")
}

fn code(o: &Output) -> i32 {
    o.status.code().expect("exited normally")
}

fn write_config(dir: &Path, name: &str, v: &Value) -> PathBuf {
    let path = dir.join(name);
    std::fs::write(&path, serde_json::to_string_pretty(v).unwrap()).unwrap();
    path
}

fn closeness(trials: usize, expect: Value) -> Value {
    json!({
        "schema_version": 1,
        "seed": 4,
        "trials": trials,
        "experiment": {
            "kind": "closeness-acceptance",
            "tester": {"n": 100, "epsilon": 0.3, "rho": 0.1},
            "instance": {"type": "pair", "p": {"type": "uniform", "n": 100}, "q": {"type": "half-support", "n": 100}}
        },
        "expect": expect
    })
}

fn replicability() -> Value {
    json!({
        "schema_version": 1,
        "seed": 9,
        "trials": 30,
        "experiment": {
            "kind": "replicability",
            "tester": {
                "family": "uniformity",
                "config": {"n": 200, "epsilon": 0.3, "rho": 0.1, "sample_size_override": 60},
                "instance": {"type": "hard-uniformity", "n": 200, "epsilon": 0.3}
            },
            "xi_grid": [0.0, 0.15, 0.3]
        }
    })
}

#[test]
fn zero_trials_is_a_validation_error() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), "zero.json", &closeness(0, Value::Null));
    let o = reptest(&["experiment", "--config", cfg.to_str().unwrap()]);
    assert_eq!(code(&o), 2, "{}", String::from_utf8_lossy(&o.stderr));
    let cfg = write_config(dir.path(), "ok.json", &closeness(5, Value::Null));
    assert_eq!(code(&reptest(&["experiment", "--config", cfg.to_str().unwrap(), "--trials", "0"])), 2);
}

#[test]
fn unknown_fields_and_versions_are_rejected() {
    let dir = tempfile::tempdir().unwrap();
    let mut v = closeness(5, Value::Null);
    v["bogus"] = json!(1);
    let cfg = write_config(dir.path(), "a.json", &v);
    assert_eq!(code(&reptest(&["experiment", "--config", cfg.to_str().unwrap()])), 2);
    let mut v = closeness(5, Value::Null);
    v["schema_version"] = json!(99);
    let cfg = write_config(dir.path(), "b.json", &v);
    assert_eq!(code(&reptest(&["experiment", "--config", cfg.to_str().unwrap()])), 2);
}

#[test]
fn reruns_are_byte_identical() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), "rep.json", &replicability());
    let run = |name: &str, threads: &str| {
        let out = dir.path().join(name);
        let o = reptest(&["--threads", threads, "experiment", "--config", cfg.to_str().unwrap(), "--out", out.to_str().unwrap()]);
        assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
        let mut sidecar: Value = serde_json::from_str(&std::fs::read_to_string(out.with_extension("json")).unwrap()).unwrap();
        sidecar.as_object_mut().unwrap().remove("wall_clock_secs");
        (std::fs::read(&out).unwrap(), sidecar)
    };
    let a = run("a.csv", "1");
    let b = run("b.csv", "3");
    assert!(!a.0.is_empty());
    assert_eq!(a, b);
}

#[test]
fn aggregation_ignores_record_order() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), "rep.json", &replicability());
    let out = dir.path().join("r.csv");
    assert_eq!(code(&reptest(&["experiment", "--config", cfg.to_str().unwrap(), "--out", out.to_str().unwrap()])), 0);
    let records = read_records(&out).unwrap();
    assert_eq!(records.len(), 90);
    let agg = Aggregate::from_records(&records);
    let mut shuffled = records.clone();
    shuffled.reverse();
    shuffled.rotate_left(17);
    let agg2 = Aggregate::from_records(&shuffled);
    for (g, a) in &agg.groups {
        let b = &agg2.groups[g];
        assert_eq!(a.trials, b.trials);
        let (x, y) = (a.disagreement.as_ref().unwrap(), b.disagreement.as_ref().unwrap());
        assert!((x.rate - y.rate).abs() <= 1e-12 && (x.std_error - y.std_error).abs() <= 1e-12);
    }
    assert!(agg.groups.contains_key("*"));

    // `report` on the shuffled CSV gives the sidecar's aggregate.
    let shuffled_path = dir.path().join("shuffled.csv");
    std::fs::write(&shuffled_path, reptest_cli::results::records_csv(&shuffled).unwrap()).unwrap();
    let o = reptest(&["report", "--input", shuffled_path.to_str().unwrap()]);
    assert_eq!(code(&o), 0);
    let reported: Aggregate = serde_json::from_slice(&o.stdout).unwrap();
    let sidecar: Value = serde_json::from_str(&std::fs::read_to_string(out.with_extension("json")).unwrap()).unwrap();
    let stored: Aggregate = serde_json::from_value(sidecar["aggregate"].clone()).unwrap();
    assert_eq!(reported, stored);
}

#[test]
fn check_exit_codes() {
    let dir = tempfile::tempdir().unwrap();
    let good = write_config(dir.path(), "good.json", &closeness(20, json!({"max_accept_rate": 0.2})));
    assert_eq!(code(&reptest(&["experiment", "--config", good.to_str().unwrap(), "--check"])), 0);
    let bad = write_config(dir.path(), "bad.json", &closeness(20, json!({"min_accept_rate": 0.9})));
    assert_eq!(code(&reptest(&["experiment", "--config", bad.to_str().unwrap(), "--check"])), 3);
    let none = write_config(dir.path(), "none.json", &closeness(20, Value::Null));
    assert_eq!(code(&reptest(&["experiment", "--config", none.to_str().unwrap(), "--check"])), 2);
}

#[test]
fn one_shot_uniformity_verdict() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("s.txt");
    let samples: String = (0..400).map(|i| format!("{}\n", i % 50)).collect();
    std::fs::write(&path, format!("# uniform over 50\n{samples}")).unwrap();
    let o = reptest(&["test", "--family", "uniformity", "--samples", path.to_str().unwrap(), "--n", "50", "--epsilon", "0.5", "--rho", "0.2"]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let v: Value = serde_json::from_slice(&o.stdout).unwrap();
    assert_eq!(v["outcome"]["verdict"], "accept");
    assert_eq!(v["samples"], 400);

    std::fs::write(&path, "3\n70\n").unwrap();
    let o = reptest(&["test", "--family", "uniformity", "--samples", path.to_str().unwrap(), "--n", "50", "--epsilon", "0.5", "--rho", "0.2"]);
    assert_eq!(code(&o), 2);
}

#[test]
fn mixing_reports_tau() {
    let o = reptest(&["mixing", "--m", "100", "--n", "1000", "--xi", "0.2", "--delta", "0.1", "0.001", "--horizon", "8"]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let v: Value = serde_json::from_slice(&o.stdout).unwrap();
    assert!(v.to_string().contains("tau"));
}

#[test]
fn threads_must_be_positive() {
    assert_eq!(code(&reptest(&["--threads", "0", "mixing", "--m", "1", "--n", "10", "--xi", "0.1"])), 2);
}
