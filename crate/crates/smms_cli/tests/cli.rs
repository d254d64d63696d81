use std::path::{Path, PathBuf};
use std::process::Command as Process;

use serde_json::Value;
use smms_cli::{validate_config, Command, Invocation};

fn bin() -> Process {
    Process::new(env!("CARGO_BIN_EXE_smms-lab"))
}

fn write(dir: &Path, name: &str, body: &str) -> PathBuf {
    let p = dir.join(name);
    std::fs::write(&p, body).unwrap();
    p
}

fn read_json(p: &Path) -> Value {
    serde_json::from_slice(&std::fs::read(p).unwrap()).unwrap()
}

fn column(csv: &Path, name: &str) -> Vec<f64> {
    let mut rd = csv::Reader::from_path(csv).unwrap();
    let idx = rd.headers().unwrap().iter().position(|h| h == name).unwrap();
    rd.records().map(|r| r.unwrap()[idx].parse().unwrap()).collect()
}

const INTERVAL: &str = r#""smms": {"domain": {"kind": "interval", "nodes": 11}, "n": 3, "phi0": 0, "R_g0": 1}"#;

#[test]
fn empty_configuration_is_reported() {
    let v = validate_config("", None).unwrap_err();
    assert!(v.iter().any(|x| x.message.contains("empty")));
    assert!(v.iter().any(|x| x.message.contains("command")));
}

#[test]
fn minimal_curvature_configuration_validates() {
    let cfg = validate_config(&format!(r#"{{"command": "curvature", {INTERVAL}}}"#), None).unwrap();
    assert_eq!(cfg.command, Command::Curvature);
    assert_eq!(cfg.seed, None);
}

#[test]
fn violations_are_collected_with_paths() {
    let text = r#"{"command": "flow", "colour": 1,
        "smms": {"domain": {"kind": "interval", "nodes": 1}, "n": 3, "phi0": 0, "R_g0": 1},
        "params": {"dt": -1}}"#;
    let v = validate_config(text, None).unwrap_err();
    assert!(v.len() >= 3, "{v:?}");
    assert!(v.iter().any(|x| x.message.contains("colour")), "{v:?}");
    assert!(v.iter().any(|x| x.path.contains("nodes")), "{v:?}");
    assert!(v.iter().any(|x| x.path.contains("dt")), "{v:?}");
}

#[test]
fn subcommand_must_match_configuration() {
    let text = format!(r#"{{"command": "eigen", {INTERVAL}}}"#);
    assert!(validate_config(&text, Some(Command::Flow)).is_err());
    assert!(validate_config(&text, Some(Command::Eigen)).is_ok());
}

#[test]
fn soliton_background_has_constant_weighted_curvature() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(
        dir.path(),
        "c.json",
        r#"{"command": "curvature", "smms": {"domain": {"kind": "halfspace_box", "nx": 11, "nt": 11, "x_half": 1, "t_max": 2},
            "m": 1, "phi0": {"polynomial": [[0.3, [0, 1, 0]]]}, "R_g0": 0}}"#,
    );
    let out = dir.path().join("out");
    let o = smms_cli::run(&Invocation { config: Some(cfg), out: Some(out.clone()), ..Default::default() });
    assert_eq!(o.exit_code, 0, "{}", o.report);
    // nodes on the truncation faces carry the mirror closure and are skipped
    let (x1, x2, t) =
        (column(&out.join("fields.csv"), "x1"), column(&out.join("fields.csv"), "x2"), column(&out.join("fields.csv"), "t"));
    let r = column(&out.join("fields.csv"), "R_m");
    let mut checked = 0;
    for i in 0..r.len() {
        if x1[i].abs() < 1.0 - 1e-9 && x2[i].abs() < 1.0 - 1e-9 && t[i] < 2.0 - 1e-9 {
            assert!((r[i] + 0.18).abs() < 1e-12, "{}", r[i]);
            checked += 1;
        }
    }
    assert_eq!(checked, 9 * 9 * 10);
}

#[test]
fn constant_curvature_ball_eigenvalue() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(
        dir.path(),
        "e.json",
        r#"{"command": "eigen", "smms": {"domain": {"kind": "radial_ball", "nodes": 41}, "n": 3, "m": 1, "phi0": 0, "R_g0": -1.5}}"#,
    );
    let out = dir.path().join("out");
    let o = smms_cli::run(&Invocation { config: Some(cfg), out: Some(out.clone()), ..Default::default() });
    assert_eq!(o.exit_code, 0, "{}", o.report);
    let e = read_json(&out.join("eigen.json"));
    let l = e["lb"]["lambda1"].as_f64().unwrap();
    assert!((l + 1.5).abs() < 1e-8, "{l}");
}

#[test]
fn oversized_flow_step_fails_with_kind() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(
        dir.path(),
        "f.json",
        r#"{"command": "flow", "smms": {"domain": {"kind": "interval", "nodes": 11}, "n": 3, "phi0": 0,
            "R_g0": {"polynomial": [[10.0, [0]], [-20.0, [1]]]}}}"#,
    );
    let out = dir.path().join("out");
    let o = bin().arg("flow").arg("--config").arg(&cfg).arg("--out").arg(&out).args(["--dt", "0.2"]).output().unwrap();
    assert_eq!(o.status.code(), Some(1));
    let report: Value = serde_json::from_slice(&o.stdout).unwrap();
    assert_eq!(report["status"], "error");
    assert_eq!(report["kind"], "step_size");
    assert_eq!(read_json(&out.join("error.json"))["kind"], "step_size");
    assert_eq!(read_json(&out.join("manifest.json"))["status"], "error");
}

#[test]
fn bad_flag_value_is_a_config_error() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(dir.path(), "f.json", &format!(r#"{{"command": "flow", {INTERVAL}}}"#));
    let o = bin().arg("flow").arg("--config").arg(&cfg).arg("--out").arg(dir.path().join("o")).arg("--dt=0").output().unwrap();
    assert_eq!(o.status.code(), Some(2));
    let report: Value = serde_json::from_slice(&o.stdout).unwrap();
    assert_eq!(report["kind"], "config");
    assert_eq!(report["violations"][0]["path"], "--dt");
}

#[test]
fn unknown_subcommand_is_a_usage_error() {
    let o = bin().arg("levitate").output().unwrap();
    assert_eq!(o.status.code(), Some(2));
    let report: Value = serde_json::from_slice(&o.stdout).unwrap();
    assert_eq!(report["kind"], "usage");
}

#[test]
fn missing_config_file_is_an_io_error() {
    let dir = tempfile::tempdir().unwrap();
    let o = bin().arg("eigen").arg("--config").arg(dir.path().join("absent.json")).output().unwrap();
    assert_eq!(o.status.code(), Some(1));
    let report: Value = serde_json::from_slice(&o.stdout).unwrap();
    assert_eq!(report["kind"], "io");
}

#[test]
fn manifest_lists_every_written_file() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(dir.path(), "c.json", &format!(r#"{{"command": "flow", {INTERVAL}, "params": {{"t_end": 0.01}}}}"#));
    let out = dir.path().join("out");
    let o = smms_cli::run(&Invocation { config: Some(cfg.clone()), out: Some(out.clone()), ..Default::default() });
    assert_eq!(o.exit_code, 0, "{}", o.report);
    let m = read_json(&out.join("manifest.json"));
    let mut listed: Vec<String> =
        m["outputs"].as_array().unwrap().iter().map(|o| o["name"].as_str().unwrap().to_string()).collect();
    listed.sort();
    let mut present: Vec<String> =
        std::fs::read_dir(&out).unwrap().map(|e| e.unwrap().file_name().to_string_lossy().into_owned()).collect();
    present.sort();
    assert_eq!(listed, present);
    for o in m["outputs"].as_array().unwrap() {
        if o["name"] != "manifest.json" {
            let len = std::fs::metadata(out.join(o["name"].as_str().unwrap())).unwrap().len();
            assert_eq!(o["bytes"].as_u64(), Some(len));
        }
    }
    assert_eq!(m["command"], "flow");
    assert_eq!(m["seed"], 0);
    assert_eq!(m["config"]["command"], "flow");
    assert_eq!(m["inputs"][0], cfg.display().to_string());
}

#[test]
fn csv_field_inputs_are_recorded() {
    let dir = tempfile::tempdir().unwrap();
    let values: String = (0..11).map(|i| format!("{}\n", 1.0 + 0.01 * i as f64)).collect();
    write(dir.path(), "w.csv", &format!("value\n{values}"));
    let cfg = write(dir.path(), "c.json", &format!(r#"{{"command": "curvature", {INTERVAL}, "params": {{"w": "w.csv"}}}}"#));
    let out = dir.path().join("out");
    let o = smms_cli::run(&Invocation { config: Some(cfg), out: Some(out.clone()), ..Default::default() });
    assert_eq!(o.exit_code, 0, "{}", o.report);
    let m = read_json(&out.join("manifest.json"));
    assert_eq!(m["inputs"].as_array().unwrap().len(), 2);
    assert_eq!(column(&out.join("fields.csv"), "w")[10], 1.1);
}

#[test]
fn wrong_length_field_is_an_input_error() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(dir.path(), "c.json", &format!(r#"{{"command": "curvature", {INTERVAL}, "params": {{"w": [1, 2]}}}}"#));
    let o = smms_cli::run(&Invocation { config: Some(cfg), out: Some(dir.path().join("o")), ..Default::default() });
    assert_eq!(o.exit_code, 2);
    assert_eq!(o.report["kind"], "input");
}

#[test]
fn seeded_multistart_is_reproducible() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(
        dir.path(),
        "m.json",
        r#"{"command": "minimize", "smms": {"domain": {"kind": "radial_ball", "nodes": 21}, "n": 3, "phi0": 0, "R_g0": 0, "H_g0": 2},
            "params": {"starts": 3, "max_iter": 200}}"#,
    );
    let runs: Vec<Vec<u8>> = [(7, "a"), (7, "b"), (8, "c")]
        .iter()
        .map(|&(seed, name)| {
            let out = dir.path().join(name);
            let o = smms_cli::run(&Invocation {
                config: Some(cfg.clone()),
                out: Some(out.clone()),
                seed: Some(seed),
                ..Default::default()
            });
            assert_eq!(o.exit_code, 0, "{}", o.report);
            std::fs::read(out.join("history.csv")).unwrap()
        })
        .collect();
    assert_eq!(runs[0], runs[1]);
    assert_ne!(runs[0], runs[2]);
}

#[test]
fn refused_solve_exits_cleanly() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(dir.path(), "s.json", &format!(r#"{{"command": "solve", {INTERVAL}}}"#));
    let out = dir.path().join("out");
    let o = bin().arg("solve").arg("--config").arg(&cfg).arg("--out").arg(&out).output().unwrap();
    assert_eq!(o.status.code(), Some(0));
    let s = read_json(&out.join("solve.json"));
    assert_eq!(s["status"], "refused");
    assert!(!s["failed"].as_array().unwrap().is_empty(), "{s}");
}

#[test]
fn criteria_rejects_a_background() {
    let v = validate_config(&format!(r#"{{"command": "criteria", {INTERVAL}}}"#), None).unwrap_err();
    assert!(v.iter().any(|x| x.path.contains("smms")), "{v:?}");
}

#[test]
fn gns_needs_a_halfspace() {
    let v = validate_config(&format!(r#"{{"command": "gns", {INTERVAL}}}"#), None).unwrap_err();
    assert!(!v.is_empty());
}
