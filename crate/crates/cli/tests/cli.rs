use std::process::{Command, Output};

use serde_json::Value;

fn mfmp(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_mfmp"))
        .args(args)
        .output()
        .expect("run mfmp")
}

fn json(out: &Output) -> Value {
    serde_json::from_slice(&out.stdout).expect("json output")
}

fn code(out: &Output) -> i32 {
    out.status.code().expect("exit code")
}

#[test]
fn minreflux_scenario1() {
    let out = mfmp(&["minreflux", "examples/ex1_scenario1.json"]);
    assert_eq!(code(&out), 0);
    let doc = json(&out);
    assert_eq!(doc["schema_version"], 1);
    let s = &doc["summary"];
    assert!((s["v_reb_min"].as_f64().unwrap() - 165.95).abs() / 165.95 < 5e-3);
    assert!((s["r_min"].as_f64().unwrap() - 2.162).abs() / 2.162 < 5e-3);
    assert_eq!(s["controlling_stream"], "F1");
}

#[test]
fn output_is_byte_stable() {
    for name in ["ex1_scenario1", "ex1_scenario2", "ex2", "ex3_fixed"] {
        let a = mfmp(&["minreflux", name]);
        let b = mfmp(&["minreflux", name]);
        assert_eq!(code(&a), 0, "{name}");
        assert_eq!(a.stdout, b.stdout, "{name}");
    }
    for name in [
        "ex1_scenario1",
        "ex1_scenario2",
        "ex2",
        "ex3_fixed",
        "ex3_free",
        "ex3_fullB_probe",
    ] {
        let out = mfmp(&["validate", name]);
        assert_eq!(code(&out), 0, "{name}");
        assert_eq!(json(&out)["valid"], true);
    }
}

#[test]
fn decompose_scenario2_warns() {
    let out = mfmp(&["decompose", "ex1_scenario2"]);
    assert_eq!(code(&out), 0);
    let doc = json(&out);
    let r = doc["result"]["reflux"].as_f64().unwrap();
    assert!((r - 19.714).abs() / 19.714 < 1e-2);
    let warnings = doc["warnings"].as_array().unwrap();
    assert!(warnings.iter().any(|w| w.as_str().unwrap().contains("overestimates")));
}

#[test]
fn validate_rejects_mass_imbalance() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("bad.json");
    let text = mfmp(&["--seed-docs", dir.path().to_str().unwrap()]);
    assert_eq!(code(&text), 0);
    let good = std::fs::read_to_string(dir.path().join("ex1_scenario1.json")).unwrap();
    let mut spec: Value = serde_json::from_str(&good).unwrap();
    spec["distillate"][0] = Value::from(60.0);
    std::fs::write(&path, spec.to_string()).unwrap();
    let out = mfmp(&["validate", path.to_str().unwrap()]);
    assert_eq!(code(&out), 1);
    assert!(!out.stderr.is_empty());
}

#[test]
fn infeasible_probe_exits_2() {
    let out = mfmp(&["optimize", "ex3_fullB_probe", "--grid", "8"]);
    assert_eq!(code(&out), 2);
    assert_eq!(json(&out)["result"]["status"], "infeasible");
}

#[test]
fn usage_errors_exit_1() {
    assert_eq!(code(&mfmp(&["frobnicate"])), 1);
    assert_eq!(code(&mfmp(&["optimize", "ex3_free", "--grid", "0"])), 1);
    assert_eq!(code(&mfmp(&["simulate", "ex2", "--reflux", "-1"])), 1);
    assert_eq!(code(&mfmp(&["minreflux", "no_such_example"])), 1);
    assert_eq!(code(&mfmp(&["validate", "ex2", "--format", "svg"])), 1);
    let out = Command::new(env!("CARGO_BIN_EXE_mfmp"))
        .args(["validate", "ex2"])
        .env("MFMP_THREADS", "0")
        .output()
        .unwrap();
    assert_eq!(code(&out), 1);
}

#[test]
fn simulate_csv_and_ternary_svg() {
    let out = mfmp(&["simulate", "ex2", "--reflux", "3", "--stages", "10", "--format", "csv"]);
    assert_eq!(code(&out), 0);
    let text = String::from_utf8(out.stdout).unwrap();
    let mut lines = text.lines();
    assert_eq!(
        lines.next().unwrap().split(',').take(3).collect::<Vec<_>>(),
        ["stage", "section", "x_n-octane"]
    );
    assert_eq!(lines.count(), 40);
    let out = mfmp(&["ternary-export", "ex1_scenario1", "--stages", "10", "--format", "svg"]);
    assert_eq!(code(&out), 0);
    assert!(String::from_utf8(out.stdout).unwrap().starts_with("<svg"));
    assert_eq!(code(&mfmp(&["ternary-export", "ex3_fixed", "--stages", "0"])), 1);
}

#[test]
fn out_flag_and_threads() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("r.json");
    let out = Command::new(env!("CARGO_BIN_EXE_mfmp"))
        .args(["optimize", "ex3_free", "--grid", "16", "--out", path.to_str().unwrap()])
        .env("MFMP_THREADS", "2")
        .output()
        .unwrap();
    assert_eq!(code(&out), 0);
    let doc: Value = serde_json::from_str(&std::fs::read_to_string(&path).unwrap()).unwrap();
    let v = doc["result"]["v_reb_min"].as_f64().unwrap();
    assert!((v - 71.87).abs() / 71.87 < 1e-2);
}
