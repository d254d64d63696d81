use std::io::Write;
use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};
use smms_cli::{run, Command, FlowOverrides, Invocation};

#[derive(Parser)]
#[command(name = "smms-lab", version, about = "Experiments on weighted conformal geometry with boundary")]
struct Cli {
    #[command(subcommand)]
    command: Sub,
}

#[derive(Args)]
struct Common {
    /// JSON experiment configuration.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Output directory (default: the config's `out`, then `smms_out`).
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long)]
    seed: Option<u64>,
}

#[derive(Args)]
struct FlowArgs {
    #[command(flatten)]
    common: Common,
    /// Volume preserving flow (the default unless the config says otherwise).
    #[arg(long, conflicts_with = "unnormalized")]
    normalized: bool,
    #[arg(long)]
    unnormalized: bool,
    #[arg(long)]
    t_end: Option<f64>,
    #[arg(long)]
    dt: Option<f64>,
    #[arg(long)]
    sample_every: Option<usize>,
}

#[derive(Subcommand)]
enum Sub {
    /// Weighted curvatures of a background, optionally after a conformal change.
    Curvature(Common),
    /// First eigenpairs of both Robin problems and the sign criteria.
    Eigen(Common),
    /// Weighted Yamabe flow with energy and volume trace.
    Flow(FlowArgs),
    /// Monotone iteration toward a smaller metric of prescribed curvature.
    Solve(Common),
    /// Trace quotient of an extremal on a half-space domain.
    Gns(Common),
    /// Minimization of the Escobar quotient.
    Minimize(Common),
    /// Residuals of the gradient soliton system.
    Soliton(Common),
    /// The acceptance suite.
    Criteria(Common),
}

fn main() {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) if !e.use_stderr() => e.exit(),
        Err(e) => {
            let report = serde_json::json!({
                "status": "error",
                "kind": "usage",
                "message": e.to_string().trim_end(),
                "violations": [],
            });
            emit(&report);
            std::process::exit(2);
        }
    };
    let (command, common, flow) = match cli.command {
        Sub::Curvature(c) => (Command::Curvature, c, FlowOverrides::default()),
        Sub::Eigen(c) => (Command::Eigen, c, FlowOverrides::default()),
        Sub::Solve(c) => (Command::Solve, c, FlowOverrides::default()),
        Sub::Gns(c) => (Command::Gns, c, FlowOverrides::default()),
        Sub::Minimize(c) => (Command::Minimize, c, FlowOverrides::default()),
        Sub::Soliton(c) => (Command::Soliton, c, FlowOverrides::default()),
        Sub::Criteria(c) => (Command::Criteria, c, FlowOverrides::default()),
        Sub::Flow(f) => {
            let normalized = if f.normalized {
                Some(true)
            } else if f.unnormalized {
                Some(false)
            } else {
                None
            };
            let o = FlowOverrides { normalized, t_end: f.t_end, dt: f.dt, sample_every: f.sample_every };
            (Command::Flow, f.common, o)
        }
    };
    let inv = Invocation { command: Some(command), config: common.config, out: common.out, seed: common.seed, flow };
    let outcome = run(&inv);
    emit(&outcome.report);
    std::process::exit(outcome.exit_code);
}

/// Prints the report; a closed stdout (say, piped into `head`) is not an error.
fn emit(report: &serde_json::Value) {
    let text = serde_json::to_string_pretty(report).expect("serializable report");
    let _ = writeln!(std::io::stdout().lock(), "{text}");
}
