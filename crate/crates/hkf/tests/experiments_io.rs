use std::process::Command;

use hkf::experiments::{self, default_config, read_csv, EstimateRow, Experiment, ExperimentConfig, ExperimentReport};

fn small_regularity() -> ExperimentConfig {
    ExperimentConfig::from_json(
        r#"{"experiment":"regularity","truth":{"kind":"matern","s":2.0},"q":6,"instances":4,"seed":11,
            "estimator":{"coarse_n":60}}"#,
    )
    .unwrap()
}

#[test]
fn runs_are_deterministic() {
    let cfg = small_regularity();
    let a = experiments::run(&cfg).unwrap();
    let b = experiments::run(&cfg).unwrap();
    assert_eq!(a.estimates, b.estimates);
    assert_eq!(a.summaries, b.summaries);
    assert_eq!(a.provenance.config_hash, b.provenance.config_hash);
    let mut other = cfg.clone();
    other.seed = 12;
    assert_ne!(experiments::run(&other).unwrap().estimates, a.estimates);
}

#[test]
fn artifacts_round_trip() {
    let cfg = small_regularity();
    let report = experiments::run(&cfg).unwrap();
    let dir = tempfile::tempdir().unwrap();
    report.write(dir.path()).unwrap();
    for f in ["estimates.csv", "loss_curve.csv", "l2curve.csv", "report.json"] {
        assert!(dir.path().join(f).exists(), "{f}");
    }
    let back = ExperimentReport::load(dir.path()).unwrap();
    assert_eq!(back.estimates, report.estimates);
    assert_eq!(back.summaries, report.summaries);
    assert_eq!(back.loss_curves, report.loss_curves);
    let rows: Vec<EstimateRow> = read_csv(&dir.path().join("estimates.csv")).unwrap();
    assert_eq!(rows, report.estimates);
}

#[test]
fn tampered_summary_is_detected() {
    let report = experiments::run(&small_regularity()).unwrap();
    let dir = tempfile::tempdir().unwrap();
    report.write(dir.path()).unwrap();
    let path = dir.path().join("report.json");
    let mut json: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(&path).unwrap()).unwrap();
    json["summaries"][0]["mean"] = serde_json::json!(123.0);
    std::fs::write(&path, serde_json::to_string(&json).unwrap()).unwrap();
    assert!(ExperimentReport::load(dir.path()).is_err());
}

#[test]
fn invalid_configurations_are_rejected() {
    let bad = [
        r#"{"experiment":"regularity","truth":{"kind":"matern","s":2.5},"q":9,"bogus":1}"#,
        r#"{"experiment":"regularity","truth":{"kind":"matern","s":2.5},"q":1}"#,
        r#"{"experiment":"regularity","truth":{"kind":"matern","s":2.5},"instances":0}"#,
        r#"{"experiment":"regularity","truth":{"kind":"matern","s":0.3}}"#,
        r#"{"experiment":"varcoef","truth":{"kind":"matern","s":2.5}}"#,
        r#"{"experiment":"regularity","truth":{"kind":"file","path":"/nonexistent/truth.csv"}}"#,
        r#"{"experiment":"nonsense","truth":{"kind":"matern","s":2.5}}"#,
    ];
    for text in bad {
        let ok = ExperimentConfig::from_json(text).and_then(|c| c.validate());
        assert!(ok.is_err(), "accepted: {text}");
    }
}

#[test]
fn default_configurations_validate() {
    for e in Experiment::ALL {
        let cfg = default_config(e);
        cfg.validate().unwrap();
        assert_eq!(cfg.experiment, e);
    }
}

#[test]
fn cli_dump_config_and_errors() {
    let exe = env!("CARGO_BIN_EXE_hkf");
    let out = Command::new(exe).args(["regularity", "--dump-config", "--seed", "5"]).output().unwrap();
    assert!(out.status.success());
    let cfg = ExperimentConfig::from_json(std::str::from_utf8(&out.stdout).unwrap()).unwrap();
    assert_eq!(cfg.seed, 5);
    let out = Command::new(exe).arg("not-an-experiment").output().unwrap();
    assert!(!out.status.success());
}

#[test]
fn cli_writes_artifacts() {
    let dir = tempfile::tempdir().unwrap();
    let cfg_path = dir.path().join("cfg.json");
    std::fs::write(&cfg_path, serde_json::to_string(&small_regularity()).unwrap()).unwrap();
    let out_dir = dir.path().join("out");
    let out = Command::new(env!("CARGO_BIN_EXE_hkf"))
        .args(["regularity", "--config"])
        .arg(&cfg_path)
        .arg("--out")
        .arg(&out_dir)
        .output()
        .unwrap();
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let report = ExperimentReport::load(&out_dir).unwrap();
    assert_eq!(report.estimates, experiments::run(&small_regularity()).unwrap().estimates);
}
