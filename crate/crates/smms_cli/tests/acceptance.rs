//! Acceptance criteria 1 to 10, one PASS/FAIL line each.
//!
//! Run with `cargo test -p smms_cli --test acceptance -- --nocapture` to see
//! the lines. Limits are restated here rather than read back from the
//! reports, so a loosened limit in the library shows up as a failure.

use std::collections::BTreeMap;
use std::path::Path;

use sha2::{Digest, Sha256};
use smms_cli::criteria::{self, CriterionReport};
use smms_cli::{Command, Invocation};

const SEED: u64 = 20_240_601;

enum Rule {
    AtMost(f64),
    AtLeast(f64),
    Below(f64),
    Above(f64),
    /// Strictly below the value of another metric of the same criterion.
    BelowMetric(&'static str),
}

fn expectations(id: u32) -> Vec<(&'static str, Rule)> {
    use Rule::*;
    match id {
        1 => vec![("error_over_5h2_c4", AtMost(1.0)), ("min_observed_order", AtLeast(1.9))],
        2 => vec![("max_lb_error", AtMost(1e-8)), ("max_bar_error", AtMost(1e-8))],
        3 => vec![
            ("bar_sign_holds", AtLeast(50.0)),
            ("lb_sign_holds", AtLeast(50.0)),
            ("max_lambda1_bar", Below(0.0)),
            ("max_lambda1_lb", Below(0.0)),
        ],
        4 => vec![
            ("max_mean_curvature", AtMost(0.0)),
            ("lambda1_lb", Below(0.0)),
            ("lambda1_bar", Below(0.0)),
            ("min_w", Above(0.0)),
            ("max_w", Below(1.0)),
            ("yamabe_residual", AtMost(1e-8)),
            ("max_sweep_increase", AtMost(1e-12)),
            ("max_bracket_violation", AtMost(1e-12)),
            ("replay_difference", AtMost(1e-12)),
            ("newton_difference", AtMost(1e-7)),
        ],
        5 => vec![
            ("max_mean_curvature", AtMost(0.0)),
            ("lambda1_bar", Above(0.0)),
            ("starts_reaching_one", AtLeast(10.0)),
            ("max_deviation_from_one", AtMost(1e-6)),
        ],
        6 => vec![
            ("max_energy_increase", AtMost(5e-3)),
            ("max_volume_drift", AtMost(1e-2)),
            ("reparametrization_deviation", AtMost(1e-3)),
            ("reparametrization_halving_ratio", AtLeast(1.8)),
        ],
        7 => vec![
            ("soliton_residual_nx21", AtMost(5.0 * 0.05 * 0.05)),
            ("curvature_deviation_nx21", AtMost(5.0 * 0.05 * 0.05)),
            ("soliton_residual_nx41", AtMost(5.0 * 0.025 * 0.025)),
            ("curvature_deviation_nx41", AtMost(5.0 * 0.025 * 0.025)),
        ],
        8 => vec![
            ("lambda_0_3_minus_sqrt_pi", AtMost(1e-10)),
            ("lambda_1_3_error", AtMost(1e-10)),
            ("lambda_2_4_error", AtMost(1e-10)),
            ("lambda_half_3_error", AtMost(1e-10)),
            ("gap_r20_h0.1", BelowMetric("gap_r10_h0.2")),
            ("gap_r40_h0.05", BelowMetric("gap_r20_h0.1")),
            ("final_gap", AtMost(0.02)),
        ],
        9 => vec![
            ("estimate_over_lambda", AtMost(1.02)),
            ("el_residual", AtMost(1e-6)),
            ("max_q_increase", AtMost(0.0)),
            ("gradient_fd_rel_error", AtMost(1e-5)),
        ],
        _ => unreachable!(),
    }
}

fn judge(rep: &CriterionReport) -> Result<String, String> {
    if let Some(e) = &rep.error {
        return Err(format!("experiment failed: {e}"));
    }
    let mut notes = Vec::new();
    for (name, rule) in expectations(rep.id) {
        let v = rep.metric(name).ok_or_else(|| format!("metric {name} missing"))?.value;
        let ok = match rule {
            Rule::AtMost(l) => v <= l,
            Rule::AtLeast(l) => v >= l,
            Rule::Below(l) => v < l,
            Rule::Above(l) => v > l,
            Rule::BelowMetric(other) => rep.metric(other).is_some_and(|o| v < o.value),
        };
        if !ok {
            return Err(format!("{name} = {v:e}"));
        }
        notes.push(format!("{name}={v:.3e}"));
    }
    let budget = criteria::budget(rep.id);
    if rep.elapsed_seconds > budget {
        return Err(format!("took {:.2}s, budget {budget}s", rep.elapsed_seconds));
    }
    Ok(notes.join(" "))
}

fn config(dir: &Path, name: &str, body: &str) -> std::path::PathBuf {
    let p = dir.join(name);
    std::fs::write(&p, body).unwrap();
    p
}

/// One run of every subcommand; returns `file -> sha256` over all CSV
/// artifacts.
fn run_all(root: &Path) -> Result<BTreeMap<String, String>, String> {
    let ball = r#""smms": {"domain": {"kind": "radial_ball", "nodes": 21}, "n": 3, "m": 1,
        "phi0": {"polynomial": [[0.3, [2]]]}, "R_g0": {"polynomial": [[1.0, [0]], [0.5, [1]]]}, "H_g0": 2}"#;
    let solve_bg = r#""smms": {"domain": {"kind": "interval", "nodes": 101}, "n": 3, "m": 1, "phi0": 0,
        "R_g0": "r.csv"}"#;
    let r: String = (0..101).map(|i| format!("{:?}\n", 10.0 * (std::f64::consts::PI * i as f64 / 100.0).cos())).collect();
    config(root, "r.csv", &format!("value\n{r}"));
    let cyl = r#""smms": {"domain": {"kind": "halfspace_cylinder", "nr": 21, "nt": 21, "r_max": 6, "t_max": 6}, "n": 3, "m": 1,
        "phi0": 0, "R_g0": 0}"#;
    let boxd = r#""smms": {"domain": {"kind": "halfspace_box", "nx": 11, "nt": 11, "x_half": 1, "t_max": 2}, "m": 1,
        "phi0": {"polynomial": [[0.3, [0, 1, 0]]]}, "R_g0": 0}"#;
    let runs = [
        (
            "curvature",
            format!(r#"{{"command": "curvature", {ball}, "params": {{"w": {{"polynomial": [[1.0, [0]], [0.1, [2]]]}}}}}}"#),
        ),
        ("eigen", format!(r#"{{"command": "eigen", {ball}}}"#)),
        ("flow", format!(r#"{{"command": "flow", {ball}, "params": {{"t_end": 0.02, "dt": 1e-3, "sample_every": 5}}}}"#)),
        ("solve", format!(r#"{{"command": "solve", {solve_bg}}}"#)),
        ("gns", format!(r#"{{"command": "gns", {cyl}, "params": {{"epsilon": 1.0}}}}"#)),
        ("minimize", format!(r#"{{"command": "minimize", {ball}, "params": {{"starts": 3, "max_iter": 300}}}}"#)),
        (
            "soliton",
            format!(
                r#"{{"command": "soliton", {boxd}, "params": {{"f": {{"polynomial": [[1.0, [1, 0, 0]]]}}, "lambda": -0.18}}}}"#
            ),
        ),
        ("criteria", r#"{"command": "criteria", "params": {"only": [2, 3, 5]}}"#.to_string()),
    ];
    let mut hashes = BTreeMap::new();
    for (name, body) in runs {
        let cfg = config(root, &format!("{name}.json"), &body);
        let out = root.join(name);
        let inv = Invocation { config: Some(cfg), out: Some(out.clone()), seed: Some(SEED), ..Default::default() };
        let o = smms_cli::run(&inv);
        if o.exit_code != 0 {
            return Err(format!("{name} exited {}: {}", o.exit_code, o.report));
        }
        for entry in std::fs::read_dir(&out).unwrap() {
            let p = entry.unwrap().path();
            if p.extension().is_some_and(|e| e == "csv") {
                let digest = Sha256::digest(std::fs::read(&p).unwrap());
                let key = format!("{name}/{}", p.file_name().unwrap().to_string_lossy());
                hashes.insert(key, digest.iter().map(|b| format!("{b:02x}")).collect());
            }
        }
    }
    Ok(hashes)
}

fn determinism() -> Result<String, String> {
    let a = tempfile::tempdir().unwrap();
    let b = tempfile::tempdir().unwrap();
    let first = run_all(a.path())?;
    let second = run_all(b.path())?;
    if first.is_empty() {
        return Err("no CSV artifacts".into());
    }
    if first != second {
        let differing: Vec<_> = first.keys().filter(|k| first.get(*k) != second.get(*k)).cloned().collect();
        return Err(format!("differing artifacts: {differing:?}"));
    }
    let commands: std::collections::BTreeSet<_> = first.keys().map(|k| k.split('/').next().unwrap()).collect();
    if commands.len() != Command::ALL.len() {
        return Err(format!("only {} of {} commands produced CSV files", commands.len(), Command::ALL.len()));
    }
    Ok(format!("{} CSV files identical across two runs", first.len()))
}

#[test]
fn acceptance() {
    let mut failed = Vec::new();
    for id in criteria::IDS {
        let rep = criteria::run(id, SEED);
        match judge(&rep) {
            Ok(notes) => println!("criterion {id} PASS {} ({:.2}s) {notes}", rep.title, rep.elapsed_seconds),
            Err(why) => {
                println!("criterion {id} FAIL {}: {why}", rep.title);
                failed.push(id);
            }
        }
    }
    match determinism() {
        Ok(notes) => println!("criterion 10 PASS determinism {notes}"),
        Err(why) => {
            println!("criterion 10 FAIL determinism: {why}");
            failed.push(10);
        }
    }
    assert!(failed.is_empty(), "failed criteria: {failed:?}");
}
