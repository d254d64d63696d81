use std::result::Result;
use std::sync::Arc;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde_json::{json, Value};
use smms_lab::flow::*;
use smms_lab::monotone::*;
use smms_lab::smms::conformal_curvatures_direct;
use smms_lab::spectral::*;
use smms_lab::variational::*;
use smms_lab::*;

use crate::config::{Command, DomainSpec, ExperimentConfig, Params, SmmsSpec, Violation};
use crate::criteria;
use crate::error::{CliError, Context};
use crate::fields::{build_domain, Resolver};
use crate::output::{boundary_table, node_table, num, Artifacts, Table};

/// Flow settings given on the command line; they win over `params`.
#[derive(Debug, Clone, Copy, Default)]
pub struct FlowOverrides {
    pub normalized: Option<bool>,
    pub t_end: Option<f64>,
    pub dt: Option<f64>,
    pub sample_every: Option<usize>,
}

/// Runs one validated configuration entirely in memory.
pub fn execute(
    cfg: &ExperimentConfig,
    seed: u64,
    resolver: &mut Resolver,
    flow_flags: &FlowOverrides,
) -> Result<Artifacts, CliError> {
    let mut art = Artifacts::default();
    let p = &cfg.params;
    let spec = || cfg.smms.as_ref().expect("validated: smms present");
    match cfg.command {
        Command::Curvature => curvature(spec(), p, resolver, &mut art)?,
        Command::Eigen => eigen(spec(), p, resolver, &mut art)?,
        Command::Flow => flow(spec(), p, resolver, flow_flags, &mut art)?,
        Command::Solve => solve(spec(), p, resolver, &mut art)?,
        Command::Gns => gns(spec(), p, resolver, &mut art)?,
        Command::Minimize => minimize(spec(), p, seed, resolver, &mut art)?,
        Command::Soliton => soliton(spec(), p, resolver, &mut art)?,
        Command::Criteria => run_criteria(p, seed, &mut art),
    }
    art.inputs = resolver.inputs.clone();
    Ok(art)
}

fn range(v: &[f64]) -> Value {
    let lo = v.iter().copied().fold(f64::INFINITY, f64::min);
    let hi = v.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    json!({ "min": lo, "max": hi })
}

fn sup(v: &[f64]) -> f64 {
    v.iter().fold(0.0f64, |m, x| m.max(x.abs()))
}

fn sup_diff(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).fold(0.0f64, |m, (x, y)| m.max((x - y).abs()))
}

fn factor(field: NodeField, what: &str) -> Result<Factor, CliError> {
    Factor::new(field).context(what)
}

fn curvature(spec: &SmmsSpec, p: &Params, res: &mut Resolver, art: &mut Artifacts) -> Result<(), CliError> {
    let bg = res.background(spec)?;
    let d = bg.domain();
    let rm = bg.weighted_scalar_curvature();
    let hm = bg.weighted_mean_curvature();
    let spread = |v: &[f64]| {
        let lo = v.iter().copied().fold(f64::INFINITY, f64::min);
        let hi = v.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        hi - lo
    };
    let mut summary = json!({
        "domain": d.descriptor(),
        "R_m": range(rm),
        "H_m": range(hm),
        "R_m_constant": spread(rm) <= 1e-10 * (1.0 + sup(rm)),
    });
    let transformed;
    let mut cols: Vec<(&str, &[f64])> = vec![("phi0", bg.phi0()), ("R_g0", bg.r_g0()), ("R_m", rm)];
    let mut bcols: Vec<(&str, &[f64])> = vec![("H_g0", bg.h_g0()), ("H_m", hm)];
    if let Some(wr) = p.field("w") {
        let w = factor(res.node_field(wr, d, "w")?, "conformal factor w")?;
        let img = bg.conformal_transform(&w);
        let (rd, hd) = conformal_curvatures_direct(&bg, &w);
        summary["transform"] = json!({
            "max_R_difference": sup_diff(&img.r_new, &rd),
            "max_H_difference": sup_diff(&img.h_new, &hd),
            "R_new": range(&img.r_new),
            "H_new": range(&img.h_new),
        });
        transformed = (w, img, rd, hd);
        let (w, img, rd, hd) = &transformed;
        cols.extend([("w", &w.field()[..]), ("R_transformed", &img.r_new[..]), ("R_direct", &rd[..])]);
        bcols.extend([("H_transformed", &img.h_new[..]), ("H_direct", &hd[..])]);
    }
    art.csv("fields.csv", &node_table(d, &cols));
    art.csv("boundary.csv", &boundary_table(d, &bcols));
    art.json("curvature.json", &summary);
    art.summary = summary;
    Ok(())
}

fn sign_json(r: Result<SignCriterion<f64>, LabError>) -> Value {
    match r {
        Ok(c) => json!(c),
        Err(e) => json!({ "verdict": "not_applicable", "reason": e.to_string() }),
    }
}

fn eigen(spec: &SmmsSpec, p: &Params, res: &mut Resolver, art: &mut Artifacts) -> Result<(), CliError> {
    let bg = res.background(spec)?;
    let tol = p.number("tol").unwrap_or(1e-10);
    let lb = first_eigen_lb(&bg, tol).context("first (L, B) eigenpair")?;
    let bar = first_eigen_bar(&bg, tol).context("first (Lbar, Bbar) eigenpair")?;
    let summary = json!({
        "lb": lb,
        "bar": bar,
        "sign_criteria": {
            "bar": sign_json(criterion_bar_sign(&bg)),
            "lb": sign_json(criterion_lb_sign(&bg)),
        },
    });
    art.csv("eigenfunctions.csv", &node_table(bg.domain(), &[("lb", &lb.eigenfunction), ("bar", &bar.eigenfunction)]));
    art.json("eigen.json", &summary);
    art.summary = summary;
    Ok(())
}

fn flow(spec: &SmmsSpec, p: &Params, res: &mut Resolver, flags: &FlowOverrides, art: &mut Artifacts) -> Result<(), CliError> {
    let normalized = flags.normalized.or(p.flag("normalized")).unwrap_or(true);
    let t_end = flags.t_end.or(p.number("t_end")).unwrap_or(0.1);
    let dt = flags.dt.or(p.number("dt")).unwrap_or(1e-3);
    let every = flags.sample_every.or(p.count("sample_every")).unwrap_or(10);
    let mut bad = Vec::new();
    if !(dt > 0.0 && dt.is_finite()) {
        bad.push(Violation { path: "--dt".into(), message: "must be a positive number".into() });
    }
    if !(t_end >= 0.0 && t_end.is_finite()) {
        bad.push(Violation { path: "--t-end".into(), message: "must be a number >= 0".into() });
    }
    if every == 0 {
        bad.push(Violation { path: "--sample-every".into(), message: "must be an integer >= 1".into() });
    }
    if !bad.is_empty() {
        return Err(CliError::Config(bad));
    }
    let bg = res.background(spec)?;
    let w0 = match p.field("w0") {
        Some(r) => res.node_field(r, bg.domain(), "w0")?,
        None => Field::constant(bg.domain(), 1.0),
    };
    let state = State::new(Arc::clone(&bg), w0).context("initial flow state")?;
    let (end, trace) = if normalized {
        run_normalized(state, t_end, dt, every).context("normalized flow")?
    } else {
        run_unnormalized(state, t_end, dt, every).context("unnormalized flow")?
    };
    let mut t = Table::new(["time", "energy", "energy_tilde", "volume", "average_scalar", "r_max", "r_min", "boundary_residual"]);
    for s in &trace.samples {
        t.push(
            [s.time, s.energy, s.energy_tilde, s.volume, s.average_scalar, s.r_max, s.r_min, s.boundary_residual]
                .iter()
                .map(|&x| num(x))
                .collect(),
        );
    }
    art.csv("trace.csv", &t);
    let img = bg.conformal_transform(&end.w);
    art.csv("final.csv", &node_table(bg.domain(), &[("w", end.w.field()), ("R_m", &img.r_new)]));
    let s = &trace.samples;
    let (first, last) = (s[0], s[s.len() - 1]);
    let increase = s.windows(2).map(|p| p[1].energy_tilde - p[0].energy_tilde).fold(f64::NEG_INFINITY, f64::max);
    let summary = json!({
        "normalized": normalized,
        "dt": dt,
        "t_end": t_end,
        "final_time": end.time,
        "samples": s.len(),
        "energy_tilde": { "first": first.energy_tilde, "last": last.energy_tilde, "max_increase": increase },
        "volume": { "first": first.volume, "last": last.volume, "relative_drift": (last.volume / first.volume - 1.0).abs() },
    });
    art.json("flow.json", &summary);
    art.summary = summary;
    Ok(())
}

fn solve(spec: &SmmsSpec, p: &Params, res: &mut Resolver, art: &mut Artifacts) -> Result<(), CliError> {
    let bg = res.background(spec)?;
    let mut cfg = SolverConfig::for_background(&bg);
    if let Some(e) = p.number("epsilon") {
        cfg.epsilon = e;
    }
    if let Some(d) = p.number("delta") {
        cfg.delta = d;
    }
    if let Some(t) = p.number("tol") {
        cfg.tol = t;
    }
    if let Some(n) = p.count("max_iter") {
        cfg.max_iter = n;
    }
    let summary = match find_smaller_metric_with(&bg, cfg).context("monotone solve")? {
        SmallerMetricOutcome::Refused { hypotheses, failed } => json!({
            "status": "refused",
            "failed": failed,
            "lambda1_LB": hypotheses.lambda1_lb,
            "lambda1_bar": hypotheses.lambda1_bar,
            "hypotheses": hypotheses,
        }),
        SmallerMetricOutcome::Found(found) => {
            let w = found.result.solution.field();
            let d = bg.domain();
            art.csv("solution.csv", &node_table(d, &[("lower", &found.lower.field), ("upper", &found.upper.field), ("w", w)]));
            let mut t = Table::new(["iteration", "change"]);
            for (i, c) in found.result.changes.iter().enumerate() {
                t.push(vec![(i + 1).to_string(), num(*c)]);
            }
            art.csv("changes.csv", &t);
            let newton = if p.flag("newton_check").unwrap_or(true) {
                // Newton from a coarse iterate of the same bracket
                let mut coarse_cfg = cfg;
                coarse_cfg.epsilon = found.lower.scale;
                coarse_cfg.alpha = found.lower.alpha;
                coarse_cfg.delta = found.upper.scale;
                coarse_cfg.tol = coarse_cfg.tol.max(1e-4);
                let coarse = monotone_iterate(&bg, &coarse_cfg, &found.lower.field, &found.upper.field)
                    .context("coarse monotone iterate")?;
                let nw = damped_newton(&bg, coarse.solution.field(), 1e-10, 50).context("Newton cross-check")?;
                json!({
                    "iterations": nw.iterations,
                    "residual": nw.residual,
                    "max_difference": sup_diff(nw.solution.field(), w),
                })
            } else {
                Value::Null
            };
            json!({
                "status": "found",
                "lambda1_LB": found.hypotheses.lambda1_lb,
                "lambda1_bar": found.hypotheses.lambda1_bar,
                "residual": found.result.residual,
                "iterations": found.result.iterations,
                "hypotheses": found.hypotheses,
                "lower": found.lower,
                "upper": found.upper,
                "w": range(w),
                "newton": newton,
            })
        }
    };
    art.json("solve.json", &summary);
    art.summary = summary;
    Ok(())
}

fn gns(spec: &SmmsSpec, p: &Params, res: &mut Resolver, art: &mut Artifacts) -> Result<(), CliError> {
    let d = build_domain(spec)?;
    let (n, m) = (spec.n, spec.m);
    let epsilon = p.number("epsilon").unwrap_or(1.0);
    let x0 = p.numbers("x0").map(<[f64]>::to_vec).unwrap_or_else(|| vec![0.0; n.saturating_sub(1)]);
    let cylinder = matches!(spec.domain, DomainSpec::HalfspaceCylinder { .. });
    if cylinder && x0.iter().any(|&x| x != 0.0) {
        return Err(CliError::Config(vec![Violation {
            path: "/params/x0".into(),
            message: "the cylinder reduction is centred on its axis; x0 must be zero".into(),
        }]));
    }
    let e = gns_extremal(epsilon, &x0, m, n).context("extremal")?;
    let (w, trial) = match p.field("w") {
        Some(r) => (res.node_field(r, &d, "w")?, "given"),
        None => {
            let f =
                if cylinder { Field::from_fn(&d, |x| e.radial(x[0], x[1])) } else { Field::from_fn(&d, |x| e.at(&x[..2], x[2])) };
            (f, "extremal")
        }
    };
    let extremal = (trial == "extremal").then_some(&e);
    let rep = trace_gns_report(&d, &w, m, extremal).context("trace quotient")?;
    let lam = lambda_mn(m, n).context("sharp constant")?;
    let summary = json!({
        "trial": trial,
        "epsilon": epsilon,
        "x0": x0,
        "lambda_mn": lam,
        "ratio": rep.quotient / lam,
        "gap": rep.quotient / lam - 1.0,
        "report": rep,
        "domain": d.descriptor(),
    });
    art.csv("trial.csv", &node_table(&d, &[("w", &w)]));
    art.json("gns.json", &summary);
    art.summary = summary;
    Ok(())
}

fn minimize(spec: &SmmsSpec, p: &Params, seed: u64, res: &mut Resolver, art: &mut Artifacts) -> Result<(), CliError> {
    let bg = res.background(spec)?;
    let init = match p.field("init") {
        Some(r) => res.node_field(r, bg.domain(), "init")?,
        None => Field::constant(bg.domain(), 1.0),
    };
    let tol = p.number("tol").unwrap_or(1e-7);
    let max_iter = p.count("max_iter").unwrap_or(5000);
    let starts = p.count("starts").unwrap_or(1);
    let spread = p.number("perturbation").unwrap_or(0.2);
    // start 0 is `init` itself; start i uses its own stream seeded with seed + i
    let runs: Vec<Result<EscobarMinimum<f64>, CliError>> = (0..starts)
        .into_par_iter()
        .map(|i| {
            let mut w = init.clone();
            if i > 0 {
                let mut rng = ChaCha8Rng::seed_from_u64(seed.wrapping_add(i as u64));
                for x in w.iter_mut() {
                    *x *= 1.0 + spread * rng.random_range(-1.0..1.0);
                }
            }
            let f = factor(w, &format!("start {i}"))?;
            minimize_escobar(&bg, &f, tol, max_iter).context(&format!("minimization from start {i}"))
        })
        .collect();
    let runs: Vec<EscobarMinimum<f64>> = runs.into_iter().collect::<Result<_, _>>()?;
    let best = (0..runs.len()).fold(0, |b, i| if runs[i].lambda_estimate < runs[b].lambda_estimate { i } else { b });
    let r = &runs[best];
    let lam = lambda_mn(spec.m, spec.n).ok();
    let mut h = Table::new(["start", "iteration", "q", "residual", "step"]);
    for (i, run) in runs.iter().enumerate() {
        for s in &run.history {
            h.push(vec![i.to_string(), s.iteration.to_string(), num(s.q), num(s.residual), num(s.step)]);
        }
    }
    art.csv("history.csv", &h);
    art.csv("minimizer.csv", &node_table(bg.domain(), &[("w", r.w.field())]));
    let per_start: Vec<Value> = runs
        .iter()
        .enumerate()
        .map(|(i, run)| {
            json!({
                "start": i,
                "lambda_estimate": run.lambda_estimate,
                "status": run.status,
                "iterations": run.history.len() - 1,
            })
        })
        .collect();
    let summary = json!({
        "best_start": best,
        "lambda_estimate": r.lambda_estimate,
        "lambda_mn": lam,
        "ratio": lam.map(|l| r.lambda_estimate / l),
        "status": r.status,
        "iterations": r.history.len() - 1,
        "floor_active": r.floor_active,
        "report": r.report,
        "starts": per_start,
    });
    art.json("minimize.json", &summary);
    art.summary = summary;
    Ok(())
}

fn soliton(spec: &SmmsSpec, p: &Params, res: &mut Resolver, art: &mut Artifacts) -> Result<(), CliError> {
    let bg = res.background(spec)?;
    let d = bg.domain();
    let f = res.node_field(p.field("f").expect("validated: f present"), d, "f")?;
    let lambda = p.number("lambda").expect("validated: lambda present");
    let rep = check_gradient_soliton(&bg, &f, lambda).context("soliton residuals")?;
    let r = bg.weighted_scalar_curvature();
    let r_dev = (0..d.node_count()).filter(|&i| !d.is_truncation_node(i)).fold(0.0f64, |m, i| m.max((r[i] - lambda).abs()));
    let h = d.h();
    let bound = 5.0 * h * h;
    let summary = json!({
        "lambda": lambda,
        "residuals": rep,
        "max_residual": rep.max(),
        "curvature_minus_lambda": r_dev,
        "h": h,
        "bound_5h2": bound,
        "within_bound": rep.max() <= bound,
    });
    let shifted: Vec<f64> = r.iter().map(|v| v - lambda).collect();
    art.csv("soliton.csv", &node_table(d, &[("f", &f), ("R_m", r), ("R_m_minus_lambda", &shifted)]));
    art.json("soliton.json", &summary);
    art.summary = summary;
    Ok(())
}

fn run_criteria(p: &Params, seed: u64, art: &mut Artifacts) {
    let ids: Vec<u32> = p.ids("only").map(<[u32]>::to_vec).unwrap_or_else(|| criteria::IDS.to_vec());
    let reports: Vec<criteria::CriterionReport> = ids.iter().map(|&id| criteria::run(id, seed)).collect();
    let mut t = Table::new(["id", "title", "status", "metric", "value", "relation", "limit"]);
    for r in &reports {
        let status = if r.passed() { "pass" } else { "fail" };
        if let Some(e) = &r.error {
            t.push(vec![
                r.id.to_string(),
                r.title.into(),
                status.into(),
                "error".into(),
                e.clone(),
                String::new(),
                String::new(),
            ]);
        }
        for m in &r.metrics {
            t.push(vec![
                r.id.to_string(),
                r.title.into(),
                status.into(),
                m.name.clone(),
                num(m.value),
                m.relation.symbol().into(),
                num(m.limit),
            ]);
        }
    }
    art.csv("criteria.csv", &t);
    art.json("criteria.json", &reports);
    let passed = reports.iter().filter(|r| r.passed()).count();
    art.summary = json!({
        "passed": passed,
        "failed": reports.len() - passed,
        "seconds": reports.iter().map(|r| json!({ "id": r.id, "seconds": r.elapsed_seconds })).collect::<Vec<_>>(),
    });
}
