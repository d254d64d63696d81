//! Weighted Yamabe flow with boundary as an evolution of the conformal
//! factor, its energies, the time reparametrization between the two flows
//! and the gradient soliton residuals.
//!
//! The metric is `g(t) = w^{4/k} g0` and `e^{-phi(t)} = w^{2m/k} e^{-phi0}`
//! with `k = n + m - 2`. Boundary values are slaved to interior ones through
//! the discrete Robin condition `B w = 0`, which is `H^m_{phi(t)} = 0`.

use std::sync::Arc;

use serde::Serialize;

use crate::error::{LabError, Result};
use crate::grid::Field;
use crate::scalar::{max_abs, powr, Real};
use crate::smms::{ConformalFactor, SmmsBackground};

#[derive(Debug, Clone)]
pub struct FlowState<T> {
    pub bg: Arc<SmmsBackground<T>>,
    pub w: ConformalFactor<T>,
    pub time: T,
}

#[derive(Debug, Clone, Copy, Serialize)]
pub struct FlowSample<T> {
    pub time: T,
    pub energy: T,
    pub energy_tilde: T,
    pub volume: T,
    pub average_scalar: T,
    pub r_max: T,
    pub r_min: T,
    pub boundary_residual: T,
}

#[derive(Debug, Clone, Serialize)]
pub struct FlowTrace<T> {
    pub normalized: bool,
    pub dt: T,
    pub samples: Vec<FlowSample<T>>,
}

/// Tolerance on `|B w|` after the boundary correction.
const CLOSURE_TOL: f64 = 1e-9;

impl<T: Real> FlowState<T> {
    /// Starts at time 0; the boundary values of `w0` are replaced by the
    /// ones the Robin closure assigns.
    pub fn new(bg: Arc<SmmsBackground<T>>, w0: Field<T>) -> Result<Self> {
        if w0.len() != bg.domain().node_count() {
            return Err(LabError::InvalidInput("initial factor has the wrong length".into()));
        }
        let mut w = w0.into_inner();
        close_boundary(&bg, &mut w)?;
        Ok(FlowState { w: ConformalFactor::new(Field::new(w))?, bg, time: T::zero() })
    }
}

/// Solves `(c/2) dw/dnu + H w = 0` for the boundary value, with the same
/// 3-point normal difference as [`SmmsBackground::apply_b`].
fn close_boundary<T: Real>(bg: &SmmsBackground<T>, w: &mut [T]) -> Result<()> {
    let half_c = bg.coefficients().c / T::lit(2.0);
    let h = bg.weighted_mean_curvature();
    for (s, bn) in bg.domain().boundary_nodes().iter().enumerate() {
        let two_h = T::lit(2.0) * bn.h;
        let den = half_c * T::lit(3.0) / two_h + h[s];
        if !(den > T::zero()) {
            return Err(LabError::BoundaryClosure(format!(
                "Robin closure is singular at boundary node {} (H = {})",
                bn.node, h[s]
            )));
        }
        let (a, b) = (w[bn.inward[1]], w[bn.inward[2]]);
        w[bn.node] = half_c * (T::lit(4.0) * a - b) / two_h / den;
    }
    Ok(())
}

/// [`CLOSURE_TOL`], raised to the rounding level of the 3-point normal
/// difference for low precision types.
fn closure_tolerance<T: Real>(bg: &SmmsBackground<T>) -> T {
    let c = bg.coefficients().c;
    let hmin = bg.domain().boundary_nodes().iter().fold(T::infinity(), |a, bn| a.min(bn.h));
    let hmax = max_abs(bg.weighted_mean_curvature());
    let rounding = T::lit(64.0) * T::epsilon() * (T::lit(4.0) * c / hmin + hmax);
    T::lit(CLOSURE_TOL).max(rounding)
}

fn closure_residual<T: Real>(bg: &SmmsBackground<T>, w: &[T]) -> T {
    max_abs(&bg.apply_b(w))
}

/// `L w` in finite volume form (`c (K w)_i / M_i + R_i w_i`).
fn fv_l<T: Real>(bg: &SmmsBackground<T>, w: &[T]) -> Vec<T> {
    let c = bg.coefficients().c;
    let kw = bg.stiffness().matvec(w);
    let r = bg.weighted_scalar_curvature();
    (0..w.len()).map(|i| c * kw[i] / bg.mass()[i] + r[i] * w[i]).collect()
}

/// `dw/dt` with boundary rates obtained through the (linear) closure.
/// The normalized flow uses `r = -V0 / V1` where `V0 + r V1` is the rate
/// of the discrete weighted volume: the discrete counterpart of
/// `r^m_phi` that keeps the volume exactly constant in semi-discrete time.
fn velocity<T: Real>(bg: &SmmsBackground<T>, w: &[T], normalized: bool) -> Vec<T> {
    let (mut v, r) = velocity_parts(bg, w, normalized);
    if let Some((r, v1)) = r {
        for i in 0..v.len() {
            v[i] += r * v1[i];
        }
    }
    v
}

/// Unnormalized rate and, when asked, the flow multiplier with its rate.
fn velocity_parts<T: Real>(bg: &SmmsBackground<T>, w: &[T], normalized: bool) -> (Vec<T>, Option<(T, Vec<T>)>) {
    let k = bg.coefficients().k;
    let quarter = k / T::lit(4.0);
    let e = -T::lit(4.0) / k;
    let lw = fv_l(bg, w);
    let mut v0: Vec<T> = (0..w.len()).map(|i| -quarter * powr(w[i], e) * lw[i]).collect();
    // the closure is homogeneous linear, so it maps rates to rates
    close_boundary(bg, &mut v0).expect("closure checked when the state was built");
    if !normalized {
        return (v0, None);
    }
    let mut v1: Vec<T> = w.iter().map(|&x| quarter * x).collect();
    close_boundary(bg, &mut v1).expect("closure checked when the state was built");
    let r = flow_multiplier(bg, w, &v0, &v1);
    (v0, Some((r, v1)))
}

fn flow_multiplier<T: Real>(bg: &SmmsBackground<T>, w: &[T], v0: &[T], v1: &[T]) -> T {
    let e = bg.coefficients().vol_exp() - T::one();
    let (mut a0, mut a1) = (T::zero(), T::zero());
    for i in 0..w.len() {
        let g = bg.mass()[i] * powr(w[i], e);
        a0 += g * v0[i];
        a1 += g * v1[i];
    }
    -a0 / a1
}

/// The multiplier `r` of the discrete normalized flow at `w` (see
/// [`average_scalar`] for the quadrature ratio; both agree to `O(h)`).
pub fn flow_average_scalar<T: Real>(bg: &SmmsBackground<T>, w: &ConformalFactor<T>) -> T {
    velocity_parts(bg, w.field(), true).1.map_or(T::zero(), |(r, _)| r)
}

fn stage<T: Real>(bg: &SmmsBackground<T>, w: &[T], k: &[T], a: T, dt: T) -> Result<Vec<T>> {
    let mut y: Vec<T> = w.iter().zip(k).map(|(&x, &d)| x + a * dt * d).collect();
    close_boundary(bg, &mut y)?;
    if let Some(i) = y.iter().position(|&x| !(x > T::zero()) || !x.is_finite()) {
        return Err(LabError::StepSize(format!(
            "conformal factor lost positivity at node {i} (value {}); reduce dt below {dt}",
            y[i]
        )));
    }
    Ok(y)
}

fn rk4<T: Real>(bg: &SmmsBackground<T>, w: &[T], dt: T, normalized: bool) -> Result<Vec<T>> {
    let half = T::lit(0.5);
    let k1 = velocity(bg, w, normalized);
    let k2 = velocity(bg, &stage(bg, w, &k1, half, dt)?, normalized);
    let k3 = velocity(bg, &stage(bg, w, &k2, half, dt)?, normalized);
    let k4 = velocity(bg, &stage(bg, w, &k3, T::one(), dt)?, normalized);
    let six = T::lit(6.0);
    let incr: Vec<T> = (0..w.len()).map(|i| (k1[i] + T::lit(2.0) * (k2[i] + k3[i]) + k4[i]) / six).collect();
    stage(bg, w, &incr, T::one(), dt)
}

fn advance<T: Real>(state: &FlowState<T>, dt: T, normalized: bool) -> Result<FlowState<T>> {
    if !(dt > T::zero()) || !dt.is_finite() {
        return Err(LabError::InvalidInput(format!("dt must be positive, got {dt}")));
    }
    let bg = &state.bg;
    let next = rk4(bg, state.w.field(), dt, normalized)?;
    let res = closure_residual(bg, &next);
    if !(res <= closure_tolerance(bg) * (T::one() + max_abs(&next))) {
        return Err(LabError::BoundaryClosure(format!("|B w| = {res} after correction")));
    }
    Ok(FlowState { bg: Arc::clone(bg), w: ConformalFactor::new(Field::new(next))?, time: state.time + dt })
}

/// One RK4 step of `w_t = -(k/4) R^m_phi w = -(k/4) w^{-4/k} L w`.
pub fn step_unnormalized<T: Real>(state: &FlowState<T>, dt: T) -> Result<FlowState<T>> {
    advance(state, dt, false)
}

/// One RK4 step of `w_t = (k/4) (r^m_phi - R^m_phi) w`.
pub fn step_normalized<T: Real>(state: &FlowState<T>, dt: T) -> Result<FlowState<T>> {
    advance(state, dt, true)
}

fn sample<T: Real>(state: &FlowState<T>) -> FlowSample<T> {
    let bg = &state.bg;
    let w = state.w.field();
    let img = bg.conformal_transform(&state.w);
    let (r_max, r_min) = img.r_new.iter().fold((T::neg_infinity(), T::infinity()), |(a, b), &x| (a.max(x), b.min(x)));
    FlowSample {
        time: state.time,
        energy: energy_e(bg, &state.w).dirichlet,
        energy_tilde: energy_etilde(bg, &state.w),
        volume: weighted_volume(bg, w),
        average_scalar: average_scalar(bg, &state.w),
        r_max,
        r_min,
        boundary_residual: closure_residual(bg, w),
    }
}

fn run<T: Real>(
    state: FlowState<T>,
    t_end: T,
    dt: T,
    sample_every: usize,
    normalized: bool,
) -> Result<(FlowState<T>, FlowTrace<T>)> {
    if !(t_end >= T::zero()) || !t_end.is_finite() {
        return Err(LabError::InvalidInput(format!("t_end must be >= 0, got {t_end}")));
    }
    if !(dt > T::zero()) {
        return Err(LabError::InvalidInput(format!("dt must be positive, got {dt}")));
    }
    let every = sample_every.max(1);
    let steps = step_count(t_end, dt);
    let mut st = state;
    let mut samples = vec![sample(&st)];
    let t0 = st.time;
    for s in 1..=steps {
        st = advance(&st, dt, normalized)?;
        // land exactly on the step grid instead of accumulating rounding
        st.time = t0 + dt * T::of(s);
        if s % every == 0 || s == steps {
            samples.push(sample(&st));
        }
    }
    Ok((st, FlowTrace { normalized, dt, samples }))
}

fn step_count<T: Real>(t_end: T, dt: T) -> usize {
    (t_end / dt - T::lit(1e-9)).ceil().max(T::zero()).to_usize().unwrap_or(0)
}

/// Unnormalized flow up to `t_end` (rounded up to a whole number of steps),
/// sampling every `sample_every` steps and at the end.
pub fn run_unnormalized<T: Real>(
    state: FlowState<T>,
    t_end: T,
    dt: T,
    sample_every: usize,
) -> Result<(FlowState<T>, FlowTrace<T>)> {
    run(state, t_end, dt, sample_every, false)
}

pub fn run_normalized<T: Real>(
    state: FlowState<T>,
    t_end: T,
    dt: T,
    sample_every: usize,
) -> Result<(FlowState<T>, FlowTrace<T>)> {
    run(state, t_end, dt, sample_every, true)
}

/// `int e^{-phi} dV_g = int w^{2(k+2)/k} e^{-phi0} dV_{g0}`.
pub fn weighted_volume<T: Real>(bg: &SmmsBackground<T>, w: &[T]) -> T {
    let e = bg.coefficients().vol_exp();
    bg.mass().iter().zip(w).map(|(&m, &x)| m * powr(x, e)).sum()
}

fn average_scalar_raw<T: Real>(bg: &SmmsBackground<T>, w: &[T]) -> T {
    let c = bg.coefficients();
    let lw = bg.apply_l(w);
    let mut num = T::zero();
    let mut den = T::zero();
    for i in 0..w.len() {
        let v = powr(w[i], c.vol_exp());
        num += bg.mass()[i] * v * powr(w[i], -c.q) * lw[i];
        den += bg.mass()[i] * v;
    }
    num / den
}

/// `r^m_phi = int R^m_phi e^{-phi} dV_g / int e^{-phi} dV_g` for the metric of `w`.
pub fn average_scalar<T: Real>(bg: &SmmsBackground<T>, w: &ConformalFactor<T>) -> T {
    average_scalar_raw(bg, w.field())
}

#[derive(Debug, Clone, Copy, Serialize)]
pub struct EnergyReport<T> {
    /// `int (c |grad w|^2 + R w^2) + 2 int_boundary H w^2` on the background.
    pub dirichlet: T,
    /// `int R^m_phi e^{-phi} dV_g + 2 int H^m_phi e^{-phi} dA_g`.
    pub curvature_path: T,
    pub discrepancy: T,
    /// `discrepancy <= 50 h^2 (1 + |dirichlet|)`.
    pub consistent: bool,
}

/// Both evaluations of `E(w)`; the Dirichlet form is the returned value.
pub fn energy_e<T: Real>(bg: &SmmsBackground<T>, w: &ConformalFactor<T>) -> EnergyReport<T> {
    let wf = w.field();
    let dirichlet = bg.lb_matrix().quadratic_form(wf);
    let img = bg.conformal_transform(w);
    let vol: Vec<T> = (0..wf.len()).map(|i| img.r_new[i] * img.vol_weight[i]).collect();
    let area: Vec<T> = (0..img.h_new.len()).map(|s| img.h_new[s] * img.area_weight[s]).collect();
    let curvature_path = bg.integrate(&vol) + T::lit(2.0) * bg.integrate_boundary(&area);
    let discrepancy = (dirichlet - curvature_path).abs();
    let h = bg.domain().h();
    let consistent = discrepancy <= T::lit(50.0) * h * h * (T::one() + dirichlet.abs());
    EnergyReport { dirichlet, curvature_path, discrepancy, consistent }
}

/// `E(w) / (int e^{-phi} dV_g)^{k/(k+2)}`.
pub fn energy_etilde<T: Real>(bg: &SmmsBackground<T>, w: &ConformalFactor<T>) -> T {
    let k = bg.coefficients().k;
    let v = weighted_volume(bg, w.field());
    energy_e(bg, w).dirichlet / powr(v, k / (k + T::lit(2.0)))
}

#[derive(Debug, Clone, Serialize)]
pub struct ReparametrizationReport<T> {
    pub dt: T,
    /// Rescaled time `t~(t_end)` reached by the unnormalized run.
    pub rescaled_end: T,
    pub psi_end: T,
    pub compared_samples: usize,
    pub max_deviation: T,
}

/// Runs the unnormalized flow together with `psi' = r psi` (`r` the
/// multiplier of the discrete normalized flow) and
/// `dt~/dt = psi`, rescales to `w~ = psi^{k/4} w`, and compares with an
/// independent normalized run in the time `t~`. The unnormalized trajectory
/// is resampled at the normalized step times by cubic Hermite interpolation.
pub fn reparametrization_check<T: Real>(
    bg: Arc<SmmsBackground<T>>,
    w0: Field<T>,
    t_end: T,
    dt: T,
) -> Result<ReparametrizationReport<T>> {
    let k = bg.coefficients().k;
    let quarter = k / T::lit(4.0);
    let steps = step_count(t_end, dt);
    let start = FlowState::new(Arc::clone(&bg), w0)?;

    // knots (t~, w~, dw~/dt~)
    let mut knots: Vec<(T, Vec<T>, Vec<T>)> = Vec::with_capacity(steps + 1);
    let knot = |w: &[T], psi: T, tt: T| -> (T, Vec<T>, Vec<T>) {
        let (v, r) = velocity_parts(&bg, w, true);
        let (r, _) = r.expect("normalized parts");
        let s = powr(psi, quarter);
        let wt: Vec<T> = w.iter().map(|&x| s * x).collect();
        let dw: Vec<T> = (0..w.len()).map(|i| s * (quarter * r * w[i] + v[i]) / psi).collect();
        (tt, wt, dw)
    };

    let mut w = start.w.field().to_vec();
    let mut psi = T::one();
    let mut tt = T::zero();
    knots.push(knot(&w, psi, tt));
    let half = T::lit(0.5);
    for _ in 0..steps {
        let f = |w: &[T], psi: T| -> (Vec<T>, T, T) {
            let (v, r) = velocity_parts(&bg, w, true);
            (v, r.expect("normalized parts").0 * psi, psi)
        };
        let (k1, p1, t1) = f(&w, psi);
        let y2 = stage(&bg, &w, &k1, half, dt)?;
        let (k2, p2, t2) = f(&y2, psi + half * dt * p1);
        let y3 = stage(&bg, &w, &k2, half, dt)?;
        let (k3, p3, t3) = f(&y3, psi + half * dt * p2);
        let y4 = stage(&bg, &w, &k3, T::one(), dt)?;
        let (k4, p4, t4) = f(&y4, psi + dt * p3);
        let six = T::lit(6.0);
        let two = T::lit(2.0);
        let incr: Vec<T> = (0..w.len()).map(|i| (k1[i] + two * (k2[i] + k3[i]) + k4[i]) / six).collect();
        w = stage(&bg, &w, &incr, T::one(), dt)?;
        psi += dt * (p1 + two * (p2 + p3) + p4) / six;
        tt += dt * (t1 + two * (t2 + t3) + t4) / six;
        knots.push(knot(&w, psi, tt));
    }

    if tt / dt > T::of(100 * steps.max(1)) {
        return Err(LabError::InvalidInput(format!(
            "rescaled horizon {tt} needs more than 100x the unnormalized steps; shorten t_end"
        )));
    }
    let mut norm = start;
    let mut max_dev = T::zero();
    let mut compared = 0;
    let mut seg = 0;
    loop {
        let tau = norm.time;
        if tau > tt {
            break;
        }
        while seg + 2 < knots.len() && knots[seg + 1].0 < tau {
            seg += 1;
        }
        let (a, b) = (&knots[seg], &knots[seg + 1]);
        let interp = hermite(a, b, tau);
        let dev = interp.iter().zip(norm.w.field().iter()).fold(T::zero(), |m, (&x, &y)| m.max((x - y).abs()));
        max_dev = max_dev.max(dev);
        compared += 1;
        if tau + dt > tt {
            break;
        }
        let next_time = tau + dt;
        norm = step_normalized(&norm, dt)?;
        norm.time = next_time;
    }
    Ok(ReparametrizationReport { dt, rescaled_end: tt, psi_end: psi, compared_samples: compared, max_deviation: max_dev })
}

fn hermite<T: Real>(a: &(T, Vec<T>, Vec<T>), b: &(T, Vec<T>, Vec<T>), t: T) -> Vec<T> {
    let h = b.0 - a.0;
    if h == T::zero() {
        return a.1.clone();
    }
    let s = (t - a.0) / h;
    let (s2, s3) = (s * s, s * s * s);
    let two = T::lit(2.0);
    let three = T::lit(3.0);
    let h00 = two * s3 - three * s2 + T::one();
    let h10 = s3 - two * s2 + s;
    let h01 = -two * s3 + three * s2;
    let h11 = s3 - s2;
    (0..a.1.len()).map(|i| h00 * a.1[i] + h10 * h * a.2[i] + h01 * b.1[i] + h11 * h * b.2[i]).collect()
}

#[derive(Debug, Clone, Copy, Serialize)]
pub struct SolitonReport<T> {
    /// `max |Hess f - (lambda - R^m) g0|` over the available components.
    pub hessian: T,
    /// `max |<grad f, grad phi0> - m (R^m - lambda)|` (0 when `m = 0`).
    pub drift: T,
    /// `max |H^m_{phi0}|` on the boundary.
    pub mean_curvature: T,
    /// `max |df/dnu|` on the boundary.
    pub normal_derivative: T,
}

impl<T: Real> SolitonReport<T> {
    pub fn max(&self) -> T {
        self.hessian.max(self.drift).max(self.mean_curvature).max(self.normal_derivative)
    }
}

/// Residuals of the gradient soliton system for the potential `f`.
/// Radial axes contribute `f_rr` and the angular component `f_r / r`
/// (`f_rr` at `r = 0`); mixed components come from nested differences.
/// Nodes on truncation faces are skipped: their zero-flux closure is not
/// part of the geometry.
pub fn check_gradient_soliton<T: Real>(bg: &SmmsBackground<T>, f: &[T], lambda: T) -> Result<SolitonReport<T>> {
    let d = bg.domain();
    let nn = d.node_count();
    if f.len() != nn {
        return Err(LabError::InvalidInput("potential has the wrong length".into()));
    }
    let r = bg.weighted_scalar_curvature();
    let axes = d.axis_count();
    let first: Vec<Vec<T>> = (0..axes).map(|a| d.axis_derivative(f, a)).collect();
    let mut hessian = T::zero();
    for a in 0..axes {
        let faa = d.axis_second_derivative(f, a);
        for i in (0..nn).filter(|&i| !d.is_truncation_node(i)) {
            let target = lambda - r[i];
            hessian = hessian.max((faa[i] - target).abs());
            if d.radial_power(a).is_some_and(|p| p > 0) {
                let x = d.coord(i)[a];
                let ang = if x == T::zero() { faa[i] } else { first[a][i] / x };
                hessian = hessian.max((ang - target).abs());
            }
        }
        for b in (a + 1)..axes {
            let fab = d.axis_derivative(&first[a], b);
            for i in (0..nn).filter(|&i| !d.is_truncation_node(i)) {
                hessian = hessian.max(fab[i].abs());
            }
        }
    }
    let m = bg.dim_m();
    let drift = if m == T::zero() {
        T::zero()
    } else {
        let g = d.gradient_inner(f, bg.phi0());
        (0..nn).filter(|&i| !d.is_truncation_node(i)).fold(T::zero(), |acc, i| acc.max((g[i] - m * (r[i] - lambda)).abs()))
    };
    let keep = |s: usize| !d.is_truncation_node(d.boundary_index_set()[s]);
    let hm = bg.weighted_mean_curvature();
    let mean_curvature = (0..hm.len()).filter(|&s| keep(s)).fold(T::zero(), |acc, s| acc.max(hm[s].abs()));
    let dn = d.normal_derivative(f);
    let normal_derivative = (0..dn.len()).filter(|&s| keep(s)).fold(T::zero(), |acc, s| acc.max(dn[s].abs()));
    Ok(SolitonReport { hessian, drift, mean_curvature, normal_derivative })
}
