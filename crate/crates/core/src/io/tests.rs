use std::path::Path;

use serde_json::{json, Value};

use super::*;
use crate::error::Error;
use crate::fewbody::one_body_ground_energy;
use crate::gp::OneBodySpec;
use crate::gridfile;

fn parse(v: Value) -> crate::Result<RunConfig> {
    parse_config_value(v, Path::new("."))
}

fn config_message(v: Value) -> String {
    match parse(v) {
        Err(e @ Error::Config(_)) => {
            assert_eq!(e.exit_code(), 2);
            e.to_string()
        }
        other => panic!("expected a configuration error, got {other:?}"),
    }
}

#[test]
fn minimal_scatter_config_gets_defaults() {
    let cfg = parse(json!({
        "command": "scatter",
        "parameters": {"potential": {"kind": "square_well", "dim": 3, "v0": 50.0, "radius": 1.0}}
    }))
    .unwrap();
    assert_eq!(cfg.command, Command::Scatter);
    assert_eq!(cfg.seed, 42);
    assert!(cfg.output_path.is_none());
    match cfg.parameters {
        Parameters::Scatter(p) => {
            assert_eq!(p.tol, 1e-8);
            assert!(p.extrapolate);
            assert_eq!(p.method, ScatterMethod::Grid);
            assert!(p.domain_radius.is_none() && p.cells.is_none());
        }
        other => panic!("{other:?}"),
    }
}

#[test]
fn range_violations_name_the_key() {
    let msg = config_message(json!({"command": "schedule", "parameters": {"r0": 1e-3, "beta": 0.9}}));
    assert!(msg.contains("parameters.beta") && msg.contains("3/8"), "{msg}");
    let msg = config_message(json!({"command": "gp", "parameters": {"spec": {"trap": {"kind": "harmonic", "omega": [1.0, 1.0, 1.0]}}, "coupling": -1.0}}));
    assert!(msg.contains("parameters.coupling"), "{msg}");
    let msg = config_message(json!({"command": "dyson", "parameters": {
        "v": "v.json", "u": "u.json", "r0": 1.0, "r1": 0.5, "r2": 4.0, "grid": 10}}));
    assert!(msg.contains("parameters.r1"), "{msg}");
}

#[test]
fn unknown_keys_and_type_errors_name_the_key() {
    let msg = config_message(json!({"command": "schedule", "parameters": {"r0": 1e-3, "beta": 0.2}, "sed": 3}));
    assert!(msg.contains("sed"), "{msg}");
    let msg = config_message(json!({"command": "schedule", "parameters": {"r0": 1e-3, "beta": 0.2, "stpes": 3}}));
    assert!(msg.contains("stpes"), "{msg}");
    let msg = config_message(json!({"command": "schedule", "parameters": {"r0": "small", "beta": 0.2}}));
    assert!(msg.contains("parameters.r0"), "{msg}");
    let msg = config_message(json!({"command": "scatter", "parameters": {
        "potential": {"kind": "square_well", "dim": 3, "v0": 50.0, "radius": 1.0, "depth": 2.0}}}));
    assert!(msg.contains("depth"), "{msg}");
    let msg = config_message(json!({"command": "launch"}));
    assert!(msg.contains("launch"), "{msg}");
}

#[test]
fn missing_input_file_is_reported_with_its_path() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = parse_config_value(
        json!({"command": "born", "parameters": {"potential": "no_such_potential.json"}}),
        dir.path(),
    )
    .unwrap();
    let err = run(&cfg).unwrap_err();
    assert_eq!(err.exit_code(), 2);
    assert!(err.to_string().contains("no_such_potential.json"), "{err}");
    let missing = dir.path().join("absent.json");
    match parse_config(&missing) {
        Err(Error::Io { path, .. }) => assert_eq!(path, missing),
        other => panic!("{other:?}"),
    }
}

#[test]
fn zero_potential_pipeline_gives_the_one_body_ground_energy() {
    let spec = OneBodySpec::harmonic(10);
    let cfg = parse(json!({
        "command": "pipeline",
        "parameters": {"potential": {"kind": "zero", "dim": 6}, "spec": spec, "gp_tol": 1e-11},
    }))
    .unwrap();
    let rep = run(&cfg).unwrap();
    let r = &rep.body["result"];
    assert_eq!(r["b_m"], json!(0.0));
    let e1 = one_body_ground_energy(&spec.build().unwrap());
    let e = r["e_gp"].as_f64().unwrap();
    assert!((e - e1).abs() < 1e-10 * e1, "{e} vs {e1}");
}

#[test]
fn pipeline_is_deterministic_and_reports_round_trip() {
    let dir = tempfile::tempdir().unwrap();
    std::fs::write(
        dir.path().join("v.json"),
        r#"{"kind": "gaussian6d", "amplitude": 20.0, "width": 1.0, "cutoff": 1.0}"#,
    )
    .unwrap();
    let cfg_json = json!({
        "command": "pipeline",
        "parameters": {"potential": "v.json", "spec": OneBodySpec::harmonic(12), "cells": 8, "gp_tol": 1e-9},
        "seed": 7,
        "output_path": "out/report.json",
    });
    std::fs::write(dir.path().join("run.json"), cfg_json.to_string()).unwrap();
    let cfg = parse_config(dir.path().join("run.json")).unwrap();
    let a = run(&cfg).unwrap();
    write_outputs(&a, &cfg).unwrap();
    let first = std::fs::read_to_string(dir.path().join("out/report.json")).unwrap();
    let b = run(&cfg).unwrap();
    assert_eq!(first, b.to_json());
    let back: Value = serde_json::from_str(&first).unwrap();
    assert_eq!(back, a.body);
    let r = &back["result"];
    for key in ["b_m", "e_gp", "eps0", "int_v", "coupling"] {
        assert!(r[key].is_number(), "{key}");
    }
    assert!(r["b_m"].as_f64().unwrap() < r["int_v"].as_f64().unwrap());
    let inputs = back["provenance"]["inputs"].as_array().unwrap();
    assert_eq!(inputs.len(), 1);
    assert_eq!(inputs[0]["sha256"].as_str().unwrap().len(), 64);
    let (h, u) = gridfile::read_complex(dir.path().join("out/report.u.gps1")).unwrap();
    assert_eq!((h.dim, h.n, u.len()), (3, 12, 12 * 12 * 12));
}

#[test]
fn schedule_run_reports_all_constraints() {
    let cfg = parse(json!({"command": "schedule", "parameters": {"r0": 1e-4, "beta": 0.2, "steps": 4}})).unwrap();
    let rep = run(&cfg).unwrap();
    assert_eq!(rep.body["result"]["all_constraints_ok"], json!(true));
    assert_eq!(rep.body["result"]["minimal_steps"], json!(3));
    assert_eq!(rep.table.unwrap().rows.len(), 4);
}

#[test]
fn fewbody_run_reports_requested_observables() {
    let cfg = parse(json!({
        "command": "fewbody",
        "parameters": {
            "lattice": 3,
            "particles": 3,
            "spec": {"trap": {"kind": "harmonic", "omega": [1.0, 1.0, 1.0]}, "half_width": 1.2},
            "interaction": {"kind": "gaussian6d", "amplitude": 50.0, "width": 1.0, "cutoff": 1.0},
            "observables": ["rdm1", "fraction", "binding", "hartree"],
        },
    }))
    .unwrap();
    let r = run(&cfg).unwrap().body["result"].clone();
    let obs = &r["observables"];
    assert!((obs["rdm1"]["trace"].as_f64().unwrap() - 1.0).abs() < 1e-12);
    assert!(obs["fraction"].as_f64().unwrap() <= 1.0);
    assert_eq!(obs["binding"]["pass"], json!(true));
    assert_eq!(obs["hartree"]["upper_bound_holds"], json!(true));
    assert_eq!(r["stencil"], json!("second"));
}
