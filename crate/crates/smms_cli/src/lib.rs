//! Configuration-driven experiment runner for `smms_lab`.
//!
//! A run reads one JSON configuration, executes one subcommand in memory,
//! then writes the artifacts and a `manifest.json` to the output directory.

use std::path::{Path, PathBuf};
use std::time::Instant;

use serde_json::{json, Value};

pub mod commands;
pub mod config;
pub mod criteria;
pub mod error;
pub mod fields;
pub mod output;

pub use commands::{execute, FlowOverrides};
pub use config::{validate_config, Command, ExperimentConfig, Violation};
pub use error::CliError;
pub use output::Artifacts;

pub const DEFAULT_OUT: &str = "smms_out";

#[derive(Debug, Clone, Default)]
pub struct Invocation {
    pub command: Option<Command>,
    pub config: Option<PathBuf>,
    pub out: Option<PathBuf>,
    pub seed: Option<u64>,
    pub flow: FlowOverrides,
}

/// What the process reports: exit status and the JSON printed on stdout.
#[derive(Debug, Clone)]
pub struct Outcome {
    pub exit_code: i32,
    pub report: Value,
    pub out_dir: Option<PathBuf>,
}

struct Prepared {
    cfg: ExperimentConfig,
    seed: u64,
    base: PathBuf,
}

fn prepare(inv: &Invocation) -> Result<Prepared, CliError> {
    let (text, base) = match &inv.config {
        Some(p) => {
            let text = std::fs::read_to_string(p).map_err(|e| CliError::io(p, e))?;
            (text, p.parent().map(Path::to_path_buf).unwrap_or_default())
        }
        None => ("{}".to_string(), PathBuf::new()),
    };
    let cfg = validate_config(&text, inv.command).map_err(CliError::Config)?;
    let seed = inv.seed.or(cfg.seed).unwrap_or(0);
    Ok(Prepared { cfg, seed, base })
}

/// Caps the global rayon pool at `SMMS_LAB_THREADS` when it is set.
pub fn configure_threads() -> Result<(), CliError> {
    let Ok(v) = std::env::var("SMMS_LAB_THREADS") else {
        return Ok(());
    };
    let n: usize = v
        .trim()
        .parse()
        .ok()
        .filter(|&n| n >= 1)
        .ok_or_else(|| CliError::Usage(format!("SMMS_LAB_THREADS must be an integer >= 1, got `{v}`")))?;
    // a pool built earlier in this process stays in place
    let _ = rayon::ThreadPoolBuilder::new().num_threads(n).build_global();
    Ok(())
}

fn manifest(
    inv: &Invocation,
    prepared: Option<&Prepared>,
    status: &str,
    inputs: &[PathBuf],
    files: &[(String, usize)],
    summary: &Value,
    start: Instant,
) -> Value {
    let command = prepared.map(|p| p.cfg.command).or(inv.command);
    let mut all_inputs: Vec<String> = inv.config.iter().map(|p| p.display().to_string()).collect();
    all_inputs.extend(inputs.iter().map(|p| p.display().to_string()));
    let mut outputs: Vec<Value> = files.iter().map(|(n, b)| json!({ "name": n, "bytes": b })).collect();
    outputs.push(json!({ "name": "manifest.json", "bytes": null }));
    json!({
        "tool": "smms-lab",
        "status": status,
        "command": command.map(Command::name),
        "seed": prepared.map(|p| p.seed),
        "config_path": inv.config.as_ref().map(|p| p.display().to_string()),
        "config": prepared.map(|p| p.cfg.raw.clone()),
        "inputs": all_inputs,
        "versions": { "smms_cli": env!("CARGO_PKG_VERSION"), "smms_lab": smms_lab::VERSION },
        "threads": rayon::current_num_threads(),
        "wall_time_seconds": start.elapsed().as_secs_f64(),
        "outputs": outputs,
        "summary": summary,
    })
}

fn write_json(dir: &Path, name: &str, v: &Value) -> Result<usize, CliError> {
    let mut bytes = serde_json::to_vec_pretty(v).expect("serializable");
    bytes.push(b'\n');
    std::fs::create_dir_all(dir).map_err(|e| CliError::io(dir, e))?;
    let p = dir.join(name);
    std::fs::write(&p, &bytes).map_err(|e| CliError::io(p, e))?;
    Ok(bytes.len())
}

/// Validates, executes and writes one run. Bad input never panics; every
/// failure becomes an error report with a nonzero exit code.
pub fn run(inv: &Invocation) -> Outcome {
    let start = Instant::now();
    let prepared = match configure_threads().and_then(|_| prepare(inv)) {
        Ok(p) => p,
        Err(e) => return fail(inv, None, inv.out.clone(), e, &[], start),
    };
    let command = Some(prepared.cfg.command);
    let dir = inv.out.clone().or_else(|| prepared.cfg.out.clone()).unwrap_or_else(|| PathBuf::from(DEFAULT_OUT));
    let mut resolver = fields::Resolver::new(&prepared.base);
    let art = match execute(&prepared.cfg, prepared.seed, &mut resolver, &inv.flow) {
        Ok(a) => a,
        Err(e) => return fail(inv, Some(&prepared), Some(dir), e, &resolver.inputs, start),
    };
    let files: Vec<(String, usize)> = art.files.iter().map(|(n, b)| (n.clone(), b.len())).collect();
    let written = art.write_all(&dir).and_then(|_| {
        let m = manifest(inv, Some(&prepared), "ok", &art.inputs, &files, &art.summary, start);
        write_json(&dir, "manifest.json", &m)
    });
    if let Err(e) = written {
        return fail(inv, Some(&prepared), None, e, &art.inputs, start);
    }
    let report = json!({
        "status": "ok",
        "command": command.map(Command::name),
        "out": dir.display().to_string(),
        "outputs": files.iter().map(|(n, _)| n.clone()).chain(["manifest.json".to_string()]).collect::<Vec<_>>(),
        "summary": art.summary,
    });
    Outcome { exit_code: 0, report, out_dir: Some(dir) }
}

fn fail(
    inv: &Invocation,
    prepared: Option<&Prepared>,
    dir: Option<PathBuf>,
    err: CliError,
    inputs: &[PathBuf],
    start: Instant,
) -> Outcome {
    let command = prepared.map(|p| p.cfg.command).or(inv.command);
    let mut report = err.to_json();
    report["command"] = json!(command.map(Command::name));
    if let Some(d) = &dir {
        // best effort: the directory itself may be what failed
        if let Ok(bytes) = write_json(d, "error.json", &report) {
            let files = [("error.json".to_string(), bytes)];
            let m = manifest(inv, prepared, "error", inputs, &files, &Value::Null, start);
            let _ = write_json(d, "manifest.json", &m);
        }
    }
    Outcome { exit_code: err.exit_code(), report, out_dir: dir }
}
