use std::path::{Path, PathBuf};
use std::process::Command;

use qspe_learn::learner::variance_mode;
use qspe_learn::qspe::analytic_variance;
use serde_json::{json, Value};

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_qspe-learn"))
}

fn write_config(dir: &Path, name: &str, v: &Value) -> PathBuf {
    let p = dir.join(name);
    std::fs::write(&p, serde_json::to_string_pretty(v).unwrap()).unwrap();
    p
}

fn read_json(p: &Path) -> Value {
    serde_json::from_str(&std::fs::read_to_string(p).unwrap()).unwrap()
}

fn pair_config(scenario: &str) -> Value {
    json!({
        "schema": 1,
        "scenario": scenario,
        "seed": 11,
        "spec": {"kind": "upper", "n": 2, "a": 10.0, "upper": [40.0]},
        "experiment": {"d": 8, "shots": 100000, "T": 0.001, "mode": "analog"}
    })
}

fn run_ok(config: &Path, out: &Path, extra: &[&str]) -> std::process::Output {
    let o = bin()
        .arg("run")
        .arg(config)
        .arg("--output")
        .arg(out)
        .args(extra)
        .env_remove("QSPE_LEARN_OUTPUT")
        .output()
        .unwrap();
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    o
}

#[test]
fn validate_clean_config() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), "c.json", &pair_config("learn-pair"));
    let o = bin().arg("validate").arg(&cfg).output().unwrap();
    assert_eq!(o.status.code(), Some(0));
    assert!(o.stdout.is_empty(), "{}", String::from_utf8_lossy(&o.stdout));
}

#[test]
fn validate_missing_seed_exits_2_with_location() {
    let dir = tempfile::tempdir().unwrap();
    let mut v = pair_config("learn-pair");
    v.as_object_mut().unwrap().remove("seed");
    let cfg = write_config(dir.path(), "c.json", &v);
    let o = bin().arg("validate").arg(&cfg).output().unwrap();
    assert_eq!(o.status.code(), Some(2));
    let err = String::from_utf8_lossy(&o.stderr);
    assert!(err.contains("seed") && err.contains("c.json:"), "{err}");
}

#[test]
fn validate_regime_warning_keeps_exit_0() {
    let dir = tempfile::tempdir().unwrap();
    let mut v = pair_config("learn-pair");
    v["experiment"]["d"] = json!(10);
    v["experiment"]["T"] = json!(0.005);
    let cfg = write_config(dir.path(), "c.json", &v);
    let o = bin().arg("validate").arg(&cfg).output().unwrap();
    assert_eq!(o.status.code(), Some(0));
    assert!(String::from_utf8_lossy(&o.stdout).contains("warning"));
}

#[test]
fn missing_scenario_field_is_config_failure() {
    let dir = tempfile::tempdir().unwrap();
    let mut v = pair_config("learn-all");
    v["experiment"].as_object_mut().unwrap().remove("shots");
    let cfg = write_config(dir.path(), "c.json", &v);
    let o = bin().arg("run").arg(&cfg).arg("--output").arg(dir.path().join("o")).output().unwrap();
    assert_eq!(o.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&o.stderr).contains("experiment.shots"));
    assert!(!dir.path().join("o").exists());
}

#[test]
fn scenario_failure_exits_1() {
    let dir = tempfile::tempdir().unwrap();
    let mut v = pair_config("learn-pair");
    // Zero drive passes validation but cannot be learned.
    v["spec"]["a"] = json!(0.0);
    let cfg = write_config(dir.path(), "c.json", &v);
    let o = bin().arg("run").arg(&cfg).arg("--output").arg(dir.path().join("o")).output().unwrap();
    assert_eq!(o.status.code(), Some(1), "{}", String::from_utf8_lossy(&o.stderr));
}

#[test]
fn learn_pair_report_and_replay() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), "c.json", &pair_config("learn-pair"));
    let first = dir.path().join("a");
    run_ok(&cfg, &first, &["--threads", "1"]);
    let report = read_json(&first.join("report.json"));
    let c_hat = report["results"]["pair"]["c_hat"].as_f64().unwrap();
    let sigma = report["results"]["pair"]["var_pred_c"].as_f64().unwrap().sqrt();
    assert!((c_hat - 40.0).abs() < 5.0 * sigma, "{c_hat} +- {sigma}");

    let second = dir.path().join("b");
    run_ok(&first.join("manifest.json"), &second, &["--threads", "3"]);
    let a = std::fs::read(first.join("report.json")).unwrap();
    let b = std::fs::read(second.join("report.json")).unwrap();
    assert_eq!(a, b);
    assert_eq!(
        std::fs::read(first.join("manifest.json")).unwrap(),
        std::fs::read(second.join("manifest.json")).unwrap()
    );
}

#[test]
fn seed_flag_changes_outcome() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), "c.json", &pair_config("learn-pair"));
    run_ok(&cfg, &dir.path().join("a"), &[]);
    run_ok(&cfg, &dir.path().join("b"), &["--seed", "12"]);
    let a = read_json(&dir.path().join("a/report.json"));
    let b = read_json(&dir.path().join("b/report.json"));
    assert_eq!(b["seed"], json!(12));
    assert_ne!(a["results"]["pair"]["c_hat"], b["results"]["pair"]["c_hat"]);
    assert_eq!(read_json(&dir.path().join("b/manifest.json"))["config"]["seed"], json!(12));
}

#[test]
fn env_sets_default_output() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), "c.json", &pair_config("learn-pair"));
    let out = dir.path().join("from-env");
    let o = bin().arg("run").arg(&cfg).env("QSPE_LEARN_OUTPUT", &out).output().unwrap();
    assert!(o.status.success());
    assert!(out.join("report.json").exists());
}

#[test]
fn var_pred_matches_manifest_recomputation() {
    let dir = tempfile::tempdir().unwrap();
    let mut v = pair_config("learn-all");
    v["spec"] = json!({"kind": "random", "n": 4, "a": 10.0, "c_range": [10.0, 20.0], "seed": 5});
    v["experiment"]["mode"] = json!("hybrid");
    let cfg = write_config(dir.path(), "c.json", &v);
    let out = dir.path().join("o");
    run_ok(&cfg, &out, &[]);
    let manifest = read_json(&out.join("manifest.json"));
    let report = read_json(&out.join("report.json"));
    let shots = manifest["config"]["experiment"]["shots"].as_u64().unwrap();
    let d = manifest["config"]["experiment"]["d"].as_u64().unwrap() as usize;
    let subs = report["results"]["report"]["subspaces"].as_array().unwrap();
    assert!(!subs.is_empty());
    for s in subs {
        let theta = s["estimate"]["theta_hat"].as_f64().unwrap();
        let active = s["active"].as_u64().unwrap() as usize;
        let expected = analytic_variance(shots, d, theta, variance_mode(active)).unwrap();
        assert_eq!(s["var_angles"]["theta"].as_f64().unwrap(), expected.theta);
        assert_eq!(s["var_angles"]["zeta"].as_f64().unwrap(), expected.zeta);
    }
    let csv = std::fs::read_to_string(out.join("learn-all.csv")).unwrap();
    assert_eq!(csv.lines().count(), 1 + 6);
}

#[test]
fn sweep_d_slope_and_columns() {
    let dir = tempfile::tempdir().unwrap();
    let mut v = pair_config("sweep-d");
    v["experiment"].as_object_mut().unwrap().remove("d");
    v["options"] = json!({"n_boot": 200});
    let cfg = write_config(dir.path(), "c.json", &v);
    let out = dir.path().join("o");
    run_ok(&cfg, &out, &[]);
    let mut rdr = csv::Reader::from_path(out.join("sweep-d.csv")).unwrap();
    assert_eq!(
        rdr.headers().unwrap().iter().collect::<Vec<_>>(),
        ["d", "var_boot", "var_pred", "cr_bound", "slope_fit"]
    );
    let rows: Vec<csv::StringRecord> = rdr.records().map(|r| r.unwrap()).collect();
    assert_eq!(rows.len(), 11);
    for r in &rows {
        // 17 significant digits.
        let mantissa = r[2].split('e').next().unwrap();
        assert_eq!(mantissa.replace(['.', '-'], "").len(), 17, "{}", &r[2]);
        let (pred, cr): (f64, f64) = (r[2].parse().unwrap(), r[3].parse().unwrap());
        assert!((pred / cr - 1.0).abs() < 1e-12, "{pred} {cr}");
    }
    let report = read_json(&out.join("report.json"));
    let slope = report["results"]["slope"].as_f64().unwrap();
    assert!((-4.3..=-3.7).contains(&slope), "{slope}");
}

#[test]
fn rydberg_three_rows() {
    let dir = tempfile::tempdir().unwrap();
    let v = json!({
        "schema": 1,
        "scenario": "rydberg",
        "seed": 21,
        "experiment": {"d": 10, "shots": 100000}
    });
    let cfg = write_config(dir.path(), "c.json", &v);
    let out = dir.path().join("o");
    run_ok(&cfg, &out, &[]);
    let mut rdr = csv::Reader::from_path(out.join("rydberg.csv")).unwrap();
    let rows: Vec<csv::StringRecord> = rdr.records().map(|r| r.unwrap()).collect();
    assert_eq!(rows.len(), 3);
    for r in &rows {
        let (truth, est): (f64, f64) = (r[2].parse().unwrap(), r[3].parse().unwrap());
        assert!((est / truth - 1.0).abs() < 0.05, "{truth} {est}");
    }
}

#[test]
fn robustness_cases_and_decompose_check() {
    let dir = tempfile::tempdir().unwrap();
    let mut v = pair_config("robustness");
    v["experiment"].as_object_mut().unwrap().remove("d");
    v["sweep"] = json!({"d": [3, 6]});
    v["noise"] = json!({"depol_alpha": 0.9, "readout": {"p_loss": 0.01, "p_anti": 0.05}});
    let cfg = write_config(dir.path(), "c.json", &v);
    let out = dir.path().join("o");
    run_ok(&cfg, &out, &[]);
    let text = std::fs::read_to_string(out.join("robustness.csv")).unwrap();
    let cases: Vec<&str> = text.lines().skip(1).map(|l| l.split(',').next().unwrap()).collect();
    assert_eq!(cases, ["readout", "readout", "depolarizing", "depolarizing", "joint", "joint"]);

    let v = json!({
        "schema": 1,
        "scenario": "decompose-check",
        "seed": 0,
        "spec": {"kind": "random", "n": 4, "a": 10.0, "c_range": [-50.0, 50.0], "seed": 2},
        "experiment": {"T": 0.01}
    });
    let cfg = write_config(dir.path(), "d.json", &v);
    let out = dir.path().join("d");
    run_ok(&cfg, &out, &[]);
    let report = read_json(&out.join("report.json"));
    let drives = report["results"]["drives"].as_array().unwrap();
    assert_eq!(drives.len(), 4);
    for d in drives {
        assert!(d["max_off_block"].as_f64().unwrap() < 1e-10);
        assert!(d["max_propagator_mismatch"].as_f64().unwrap() < 1e-10);
    }
}

#[test]
fn tampered_manifest_is_rejected() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), "c.json", &pair_config("learn-pair"));
    let out = dir.path().join("o");
    run_ok(&cfg, &out, &[]);
    let mut m = read_json(&out.join("manifest.json"));
    m["config"]["experiment"]["shots"] = json!(10);
    let bad = write_config(dir.path(), "m.json", &m);
    let o = bin().arg("run").arg(&bad).arg("--output").arg(dir.path().join("x")).output().unwrap();
    assert_eq!(o.status.code(), Some(2));
}
