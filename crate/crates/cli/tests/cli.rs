use std::path::Path;
use std::process::{Command, Output};

use serde_json::Value;

fn holonomic(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_holonomic"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn reports(out: &Output) -> Vec<Value> {
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    serde_json::from_slice::<Vec<Value>>(&out.stdout).unwrap()
}

fn value_of(reports: &[Value], kind: &str) -> f64 {
    reports.iter().find(|r| r["kind"] == kind).unwrap()["value"].as_f64().unwrap()
}

#[test]
fn s_gate_under_decoherence() {
    let r = reports(&holonomic(&["gate", "--protocol", "dcnhqc", "--gate", "S", "--gamma-rate", "5e-4"]));
    let f = value_of(&r, "gate_six_state");
    assert!((f - 0.9974).abs() < 1e-3, "{f}");
    assert!(r[1]["integrator"]["max_trace_deviation"].as_f64().unwrap() < 1e-8);
}

#[test]
fn ideal_hadamard() {
    let r = reports(&holonomic(&[
        "gate", "--protocol", "dcnhqc", "--gate", "H", "--gamma-rate", "0", "--epsilon", "0",
    ]));
    assert!((value_of(&r, "gate_six_state") - 1.0).abs() < 1e-8);
    assert!((value_of(&r, "state") - 1.0).abs() < 1e-8);
}

#[test]
fn encoded_gate_c() {
    let r = reports(&holonomic(&[
        "gate", "--two-qubit", "--eta", "0.7853981634", "--varphi", "0", "--encoded", "--gamma-rate", "2e-4",
    ]));
    assert_eq!(r.len(), 1);
    let f = value_of(&r, "state");
    assert!((f - 0.9982).abs() < 1e-3, "{f}");
    assert!(r[0]["metadata"]["closed_system_leakage"].as_f64().unwrap() < 1e-10);
}

#[test]
fn negative_angles_and_trajectory() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("traj.csv");
    let out = holonomic(&[
        "gate", "--theta", "1.0", "--gamma-g", "-2.0", "--epsilon", "-0.05", "--samples", "11",
        "--trajectory", path.to_str().unwrap(),
    ]);
    reports(&out);
    let text = std::fs::read_to_string(&path).unwrap();
    assert_eq!(text.lines().next(), Some("t,x,y,z"));
    assert_eq!(text.lines().count(), 12);
}

#[test]
fn epsilon_scan_rows() {
    let out = holonomic(&["scan", "--axis", "epsilon:-0.1:0.1:41", "--protocol", "nhqc", "--gate", "S"]);
    assert!(out.status.success());
    let csv = String::from_utf8(out.stdout).unwrap();
    assert_eq!(csv.lines().count(), 42);
    let summary: Value = serde_json::from_slice(&out.stderr).unwrap();
    assert_eq!(summary["points"], 41);
}

#[test]
fn encoded_detuning_scan_to_file() {
    let dir = tempfile::tempdir().unwrap();
    let csv = dir.path().join("fig6b.csv");
    let out = holonomic(&[
        "scan", "--axis", "epsilon:-0.1:0.1:11", "--axis", "delta:-0.1:0.1:11", "--encoded",
        "--output", csv.to_str().unwrap(), "--jobs", "2",
    ]);
    assert!(out.status.success());
    let mut reader = csv::Reader::from_path(&csv).unwrap();
    let rows: Vec<Vec<f64>> = reader
        .records()
        .map(|r| r.unwrap().iter().map(|x| x.parse().unwrap()).collect())
        .collect();
    assert_eq!(rows.len(), 121);
    for chunk in rows.chunks(11) {
        let (lo, hi) = chunk.iter().fold((f64::MAX, f64::MIN), |(lo, hi), r| (lo.min(r[2]), hi.max(r[2])));
        assert!(hi - lo < 1e-10, "eps {}", chunk[0][0]);
    }
}

#[test]
fn flags_override_config_file() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("run.json");
    std::fs::write(&cfg, r#"{"protocol": "nhqc", "gate": "S", "epsilon": 0.1}"#).unwrap();
    let path = cfg.to_str().unwrap();
    let from_file = reports(&holonomic(&["gate", "--config", path]));
    assert_eq!(from_file[0]["metadata"]["protocol"], "nhqc");
    assert_eq!(from_file[0]["metadata"]["epsilon"], 0.1);
    let overridden = reports(&holonomic(&["gate", "--config", path, "--epsilon", "0"]));
    assert_eq!(overridden[0]["metadata"]["epsilon"], 0.0);
    assert!((value_of(&overridden, "gate_six_state") - 1.0).abs() < 1e-8);
}

#[test]
fn exit_codes() {
    assert_eq!(holonomic(&["gate", "--bogus"]).status.code(), Some(2));
    assert_eq!(holonomic(&["scan", "--gate", "S"]).status.code(), Some(2));
    assert_eq!(holonomic(&["figure", "fig9", "/tmp"]).status.code(), Some(2));
    assert_eq!(holonomic(&["gate", "--gamma-rate", "-1"]).status.code(), Some(1));
    assert_eq!(holonomic(&["gate", "--gate", "X"]).status.code(), Some(1));
    assert_eq!(holonomic(&["gate", "--two-qubit", "--gate", "H"]).status.code(), Some(1));
    assert_eq!(holonomic(&["scan", "--axis", "epsilon:-0.3:0.1:5"]).status.code(), Some(1));

    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("bad.json");
    std::fs::write(&cfg, r#"{"gamma": 1}"#).unwrap();
    assert_eq!(holonomic(&["gate", "--config", cfg.to_str().unwrap()]).status.code(), Some(2));
    assert!(holonomic(&["gate", "--help"]).status.success());
}

#[test]
fn help_lists_flags() {
    let out = holonomic(&["scan", "--help"]);
    let text = String::from_utf8(out.stdout).unwrap();
    for flag in ["--axis", "--metric", "--jobs", "--gamma-rate", "--encoded", "--config"] {
        assert!(text.contains(flag), "{flag}");
    }
}

#[test]
fn staircase_figure() {
    let dir = tempfile::tempdir().unwrap();
    let out = holonomic(&["figure", "fig3c", dir.path().to_str().unwrap()]);
    assert!(out.status.success());
    let printed: Value = serde_json::from_slice(&out.stdout).unwrap();
    assert_eq!(printed["files"].as_array().unwrap().len(), 2);
    let manifest: Value =
        serde_json::from_str(&std::fs::read_to_string(dir.path().join("manifest.json")).unwrap()).unwrap();
    assert_eq!(manifest["figure"], "fig3c");
    for f in manifest["files"].as_array().unwrap() {
        assert!(Path::new(&dir.path().join(f["path"].as_str().unwrap())).exists());
    }
}

#[test]
fn scans_are_deterministic() {
    let dir = tempfile::tempdir().unwrap();
    let run = |name: &str, jobs: &str| {
        let p = dir.path().join(name);
        let out = holonomic(&[
            "scan", "--axis", "epsilon:-0.1:0.1:5", "--axis", "gamma_rate:0:5e-4:5", "--gate", "S",
            "--jobs", jobs, "--output", p.to_str().unwrap(),
        ]);
        assert!(out.status.success());
        std::fs::read(p).unwrap()
    };
    assert_eq!(run("a.csv", "1"), run("b.csv", "3"));
}
