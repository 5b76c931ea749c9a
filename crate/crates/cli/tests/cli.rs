use std::path::Path;
use std::process::{Command, Output};

use serde_json::Value;

fn gpscatter(dir: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_gpscatter"))
        .args(args)
        .current_dir(dir)
        .env("GPSCATTER_THREADS", "1")
        .output()
        .unwrap()
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

#[test]
fn schedule_prints_json_and_writes_csv() {
    let dir = tempfile::tempdir().unwrap();
    let o = gpscatter(dir.path(), &["schedule", "--r0", "1e-4", "--beta", "0.2", "--steps", "4", "--csv", "s.csv"]);
    assert!(o.status.success(), "{}", stderr(&o));
    let v: Value = serde_json::from_slice(&o.stdout).unwrap();
    assert_eq!(v["result"]["all_constraints_ok"], Value::Bool(true));
    let csv = std::fs::read_to_string(dir.path().join("s.csv")).unwrap();
    assert_eq!(csv.lines().count(), 5, "{csv}");
}

#[test]
fn out_of_range_beta_exits_with_configuration_code() {
    let dir = tempfile::tempdir().unwrap();
    let o = gpscatter(dir.path(), &["schedule", "--r0", "1e-4", "--beta", "0.9"]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("parameters.beta"), "{}", stderr(&o));
}

#[test]
fn missing_input_file_exits_with_configuration_code() {
    let dir = tempfile::tempdir().unwrap();
    let o = gpscatter(dir.path(), &["born", "--potential", "absent.json"]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("absent.json"), "{}", stderr(&o));
    let o = gpscatter(dir.path(), &["run", "no_config.json"]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("no_config.json"), "{}", stderr(&o));
}

#[test]
fn oversized_basis_exits_with_code_four() {
    let dir = tempfile::tempdir().unwrap();
    std::fs::write(dir.path().join("spec.json"), r#"{"trap": {"kind": "harmonic", "omega": [1.0, 1.0, 1.0]}}"#).unwrap();
    let o = gpscatter(dir.path(), &["fewbody", "--lattice", "40", "--particles", "4", "--spec", "spec.json"]);
    assert_eq!(o.status.code(), Some(4), "{}", stderr(&o));
    assert!(stderr(&o).contains("too large"), "{}", stderr(&o));
}

#[test]
fn wrong_potential_dimension_is_a_configuration_error() {
    let dir = tempfile::tempdir().unwrap();
    std::fs::write(
        dir.path().join("v.json"),
        r#"{"kind": "square_well", "dim": 3, "v0": 1.0, "radius": 1.0}"#,
    )
    .unwrap();
    let o = gpscatter(dir.path(), &["scatter-mod", "--potential", "v.json"]);
    assert_eq!(o.status.code(), Some(2), "{}", stderr(&o));
    assert!(stderr(&o).contains("parameters.potential"), "{}", stderr(&o));
}

#[test]
fn gp_writes_report_and_field() {
    let dir = tempfile::tempdir().unwrap();
    std::fs::write(
        dir.path().join("spec.json"),
        r#"{"trap": {"kind": "harmonic", "omega": [1.0, 1.0, 1.0]}, "points": 10}"#,
    )
    .unwrap();
    let o = gpscatter(dir.path(), &["gp", "--spec", "spec.json", "--coupling", "2.0", "--tol", "1e-9", "--out", "gp.json"]);
    assert!(o.status.success(), "{}", stderr(&o));
    assert!(o.stdout.is_empty());
    let v: Value = serde_json::from_str(&std::fs::read_to_string(dir.path().join("gp.json")).unwrap()).unwrap();
    let r = &v["result"];
    assert!(r["eps0"].as_f64().unwrap() > r["e_gp"].as_f64().unwrap());
    assert_eq!(v["provenance"]["inputs"][0]["key"], Value::from("spec"));
    let field = std::fs::read(dir.path().join("gp.u.gps1")).unwrap();
    assert_eq!(&field[..4], b"GPS1");
}

#[test]
fn run_config_matches_equivalent_flags() {
    let dir = tempfile::tempdir().unwrap();
    std::fs::write(
        dir.path().join("run.json"),
        r#"{"command": "born", "parameters": {"potential": {"kind": "gaussian6d", "amplitude": 5.0, "width": 1.0, "cutoff": 1.0}, "order": 1}, "output_path": "a.json"}"#,
    )
    .unwrap();
    std::fs::write(
        dir.path().join("v.json"),
        r#"{"kind": "gaussian6d", "amplitude": 5.0, "width": 1.0, "cutoff": 1.0}"#,
    )
    .unwrap();
    let o = gpscatter(dir.path(), &["run", "run.json"]);
    assert!(o.status.success(), "{}", stderr(&o));
    let a: Value = serde_json::from_str(&std::fs::read_to_string(dir.path().join("a.json")).unwrap()).unwrap();
    let o = gpscatter(dir.path(), &["born", "--potential", "v.json", "--order", "1"]);
    assert!(o.status.success(), "{}", stderr(&o));
    let b: Value = serde_json::from_slice(&o.stdout).unwrap();
    assert_eq!(a["result"], b["result"]);
}

#[test]
fn unknown_subcommand_is_a_usage_error() {
    let dir = tempfile::tempdir().unwrap();
    let o = gpscatter(dir.path(), &["launch"]);
    assert_eq!(o.status.code(), Some(2));
}
