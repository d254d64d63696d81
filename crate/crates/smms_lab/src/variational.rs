//! The sharp trace constant, its extremals, the weighted Escobar quotient
//! and its minimization, and empirical bounds for the lower order constant
//! in the trace inequality.
//!
//! With `k = n + m - 2`, `p = 2(k+1)/k` and `a = k / (4(k+1))`:
//!
//! * `A(w) = int |grad w|^2 + a R w^2 + 2a int_boundary H w^2` (weighted),
//! * `B(w) = V(w)^{m/(k+1)} / S(w)^{(k+m)/(k+1)}` where
//!   `V = int |w|^p e^{-(m-1)phi/m} dV` and `S = int_boundary |w|^p e^{-phi} dA`,
//! * `Q(w) = A(w) B(w)`, invariant under `w -> c w`.

use std::collections::VecDeque;

use serde::Serialize;
use statrs::function::gamma::ln_gamma;

use crate::error::{LabError, Result};
use crate::grid::{BoundaryField, DiscreteDomain, DomainKind, Field};
use crate::linalg::{CsrMatrix, SpdSolver};
use crate::scalar::{max_abs, powr, Real};
use crate::smms::{check_positive, ConformalFactor, SmmsBackground};

fn ln_sphere_volume(d: f64) -> f64 {
    std::f64::consts::LN_2 + (d + 1.0) / 2.0 * std::f64::consts::PI.ln() - ln_gamma((d + 1.0) / 2.0)
}

/// The sharp constant of the trace inequality on the half-space,
/// evaluated in log space.
pub fn lambda_mn<T: Real>(m: T, n: usize) -> Result<T> {
    let mf = m.as_f64();
    if n < 3 || !(mf >= 0.0) || !mf.is_finite() {
        return Err(LabError::InvalidInput(format!("need n >= 3 and m >= 0, got n = {n}, m = {mf}")));
    }
    let nf = n as f64;
    let k = mf + nf - 2.0;
    let d = 2.0 * mf + nf - 1.0;
    let e1 = d / (mf + nf - 1.0);
    let ln = 2.0 * k.ln()
        + e1 * (ln_sphere_volume(d) / d - (2.0 * (2.0 * mf + nf - 2.0)).ln())
        + (ln_gamma(d) - mf * std::f64::consts::PI.ln() - ln_gamma(mf + nf - 1.0)) / (mf + nf - 1.0);
    Ok(T::lit(ln.exp()))
}

/// `w_{eps, x0}(x, t) = (2 eps / ((eps + t)^2 + |x - x0|^2))^{k/2}`.
#[derive(Debug, Clone)]
pub struct GnsExtremal<T> {
    pub epsilon: T,
    pub x0: Vec<T>,
    half_k: T,
}

pub fn gns_extremal<T: Real>(epsilon: T, x0_offset: &[T], m: T, n: usize) -> Result<GnsExtremal<T>> {
    if !(epsilon > T::zero()) {
        return Err(LabError::InvalidInput(format!("epsilon must be positive, got {epsilon}")));
    }
    if x0_offset.len() + 1 != n {
        return Err(LabError::InvalidInput(format!("x0 must have n - 1 = {} entries", n.saturating_sub(1))));
    }
    let k = T::of(n) + m - T::lit(2.0);
    Ok(GnsExtremal { epsilon, x0: x0_offset.to_vec(), half_k: k / T::lit(2.0) })
}

impl<T: Real> GnsExtremal<T> {
    /// Value at the tangential point `x` and height `t`.
    pub fn at(&self, x: &[T], t: T) -> T {
        let d2: T = x.iter().zip(&self.x0).map(|(&a, &b)| (a - b) * (a - b)).sum();
        self.at_distance2(d2, t)
    }

    /// Value when `|x - x0| = r` (the cylindrical reduction).
    pub fn radial(&self, r: T, t: T) -> T {
        self.at_distance2(r * r, t)
    }

    fn at_distance2(&self, d2: T, t: T) -> T {
        let e = self.epsilon;
        powr(T::lit(2.0) * e / ((e + t) * (e + t) + d2), self.half_k)
    }
}

fn critical_exponent<T: Real>(m: T, n: usize) -> (T, T, T, T) {
    let k = T::of(n) + m - T::lit(2.0);
    let p = T::lit(2.0) * (k + T::one()) / k;
    let alpha = m / (k + T::one());
    let beta = (k + m) / (k + T::one());
    (k, p, alpha, beta)
}

/// Trace quotient `int|grad w|^2 (int|w|^p)^{m/(k+1)} / (int_boundary |w|^p)^{(k+m)/(k+1)}`
/// with the flat measures of a half-space domain.
pub fn trace_gns_quotient<T: Real>(domain: &DiscreteDomain<T>, w: &[T], m: T) -> Result<T> {
    if !matches!(domain.kind(), DomainKind::HalfspaceCylinder | DomainKind::HalfspaceBox) {
        return Err(LabError::InvalidDomain("the trace quotient needs a half-space domain".into()));
    }
    let n = domain.dim_n();
    let (k, p, alpha, beta) = critical_exponent(m, n);
    if !(k > T::zero()) {
        return Err(LabError::InvalidInput("n + m must exceed 2".into()));
    }
    let wp: Vec<T> = w.iter().map(|&x| abs_pow(x, p)).collect();
    let trace: Vec<T> = domain.boundary_index_set().iter().map(|&i| wp[i]).collect();
    let bd = domain.integrate_boundary(&trace, None);
    if !(bd > T::zero()) {
        return Err(LabError::DivisionGuard("trace of w vanishes on the boundary".into()));
    }
    let grad = domain.dirichlet_form(w, w, None);
    let vol = domain.integrate_volume(&wp, None);
    Ok(grad * powr(vol, alpha) / powr(bd, beta))
}

fn abs_pow<T: Real>(x: T, p: T) -> T {
    if x == T::zero() {
        T::zero()
    } else {
        powr(x.abs(), p)
    }
}

#[derive(Debug, Clone, Copy, Serialize)]
pub struct GnsReport<T> {
    pub quotient: T,
    pub gradient_integral: T,
    pub volume_integral: T,
    pub boundary_integral: T,
    /// First-order bound on the relative change of the quotient when the
    /// truncated integrals of an extremal are completed to the half-space.
    pub tail_bound: Option<T>,
}

/// [`trace_gns_quotient`] with its integrals and, for an extremal centred
/// on the axis, the truncation bound from the decay envelopes
/// `w <= (2 eps)^{k/2} |y|^{-k}` and `|grad w| <= k (2 eps)^{k/2} |y|^{-k-1}`
/// outside the largest half-ball contained in the box.
pub fn trace_gns_report<T: Real>(
    domain: &DiscreteDomain<T>,
    w: &[T],
    m: T,
    extremal: Option<&GnsExtremal<T>>,
) -> Result<GnsReport<T>> {
    let quotient = trace_gns_quotient(domain, w, m)?;
    let n = domain.dim_n();
    let (k, p, alpha, beta) = critical_exponent(m, n);
    let wp: Vec<T> = w.iter().map(|&x| abs_pow(x, p)).collect();
    let trace: Vec<T> = domain.boundary_index_set().iter().map(|&i| wp[i]).collect();
    let boundary_integral = domain.integrate_boundary(&trace, None);
    let gradient_integral = domain.dirichlet_form(w, w, None);
    let volume_integral = domain.integrate_volume(&wp, None);
    let tail_bound = extremal.map(|e| {
        let last = domain.node_count() - 1;
        let top = domain.coord(last);
        let r_out = top.iter().fold(T::infinity(), |a, &b| a.min(b.abs()));
        let nf = T::of(n);
        let two = T::lit(2.0);
        let kp = p * k;
        let amp = powr(two * e.epsilon, k);
        let half_sphere = crate::grid::sphere_area::<T>(n - 1) / two;
        let edge_sphere = crate::grid::sphere_area::<T>(n - 2);
        let grad_tail = k * k * amp * half_sphere * powr(r_out, nf - two * k - two) / (two * k + two - nf);
        let vol_tail = powr(amp, p / two) * half_sphere * powr(r_out, nf - kp) / (kp - nf);
        let bd_tail = powr(amp, p / two) * edge_sphere * powr(r_out, nf - T::one() - kp) / (kp - nf + T::one());
        grad_tail / gradient_integral + alpha * vol_tail / volume_integral + beta * bd_tail / boundary_integral
    });
    Ok(GnsReport { quotient, gradient_integral, volume_integral, boundary_integral, tail_bound })
}

/// Cached pieces of the weighted Escobar quotient on one background.
pub struct Escobar<'a, T> {
    bg: &'a SmmsBackground<T>,
    a_mat: CsrMatrix<T>,
    /// `M_i e^{-(m-1) phi_i / m}` (unused when `m = 0`).
    vol_weight: Vec<T>,
    a: T,
    p: T,
    alpha: T,
    beta: T,
}

#[derive(Debug, Clone, Copy, Serialize)]
pub struct QuotientParts<T> {
    pub a: T,
    pub volume: T,
    pub boundary: T,
    pub b: T,
    pub q: T,
}

impl<'a, T: Real> Escobar<'a, T> {
    pub fn new(bg: &'a SmmsBackground<T>) -> Self {
        let c = bg.coefficients();
        let a = c.k / (T::lit(4.0) * c.nm1);
        let a_mat = bg.energy_matrix(T::one(), a, T::lit(2.0) * a);
        let m = c.m;
        let vol_weight = if m == T::zero() {
            bg.mass().to_vec()
        } else {
            bg.mass().iter().zip(bg.phi0().iter()).map(|(&mu, &f)| mu * (f / m).exp()).collect()
        };
        let (_, p, alpha, beta) = critical_exponent(m, bg.dim_n());
        Escobar { bg, a_mat, vol_weight, a, p, alpha, beta }
    }

    pub fn background(&self) -> &SmmsBackground<T> {
        self.bg
    }

    fn volume(&self, w: &[T]) -> T {
        self.vol_weight.iter().zip(w).map(|(&v, &x)| v * abs_pow(x, self.p)).sum()
    }

    fn boundary(&self, w: &[T]) -> T {
        let b = self.bg.domain().boundary_index_set();
        self.bg.boundary_mass().iter().zip(b).map(|(&s, &i)| s * abs_pow(w[i], self.p)).sum()
    }

    pub fn a_value(&self, w: &[T]) -> T {
        self.a_mat.quadratic_form(w)
    }

    pub fn parts(&self, w: &[T]) -> Result<QuotientParts<T>> {
        let boundary = self.boundary(w);
        if !(boundary > T::zero()) {
            return Err(LabError::DivisionGuard("boundary trace of w vanishes".into()));
        }
        let a = self.a_value(w);
        let volume = self.volume(w);
        let vol_factor = if self.alpha == T::zero() { T::one() } else { powr(volume, self.alpha) };
        let b = vol_factor / powr(boundary, self.beta);
        Ok(QuotientParts { a, volume, boundary, b, q: a * b })
    }

    pub fn quotient(&self, w: &[T]) -> Result<T> {
        Ok(self.parts(w)?.q)
    }

    /// Gradient of `Q` with respect to the nodal values.
    pub fn gradient(&self, w: &[T]) -> Result<Vec<T>> {
        let qp = self.parts(w)?;
        Ok(self.gradient_with(w, &qp, qp.q))
    }

    /// `dQ = 2B (Aw) + Q p (alpha M' w^{p-1} / V - beta S w^{p-1} / S(w))`,
    /// with `Q` replaced by `q_value`.
    fn gradient_with(&self, w: &[T], qp: &QuotientParts<T>, q_value: T) -> Vec<T> {
        let two = T::lit(2.0);
        let aw = self.a_mat.matvec(w);
        let pm1 = self.p - T::one();
        let mut g: Vec<T> = aw.iter().map(|&x| two * qp.b * x).collect();
        if self.alpha != T::zero() {
            let f = q_value * self.p * self.alpha / qp.volume;
            for i in 0..w.len() {
                g[i] += f * self.vol_weight[i] * signed_pow(w[i], pm1);
            }
        }
        let f = q_value * self.p * self.beta / qp.boundary;
        for (s, &i) in self.bg.domain().boundary_index_set().iter().enumerate() {
            g[i] -= f * self.bg.boundary_mass()[s] * signed_pow(w[i], pm1);
        }
        g
    }

    /// Row-scaled first variation: interior rows divided by `2aB M_i`
    /// approximate `L w + (m/k)(Q/(aB)) w^{p-1} e^{phi/m} / V`; boundary
    /// rows divided by `2aB 2S_b` approximate
    /// `B w - ((k+m)/(2k)) (Q/(aB)) w^{p-1} / S(w)`.
    pub fn el_residual(&self, w: &[T], q_value: T) -> Result<(Field<T>, BoundaryField<T>)> {
        let qp = self.parts(w)?;
        let g = self.gradient_with(w, &qp, q_value);
        let two = T::lit(2.0);
        let scale = two * self.a * qp.b;
        let b_idx = self.bg.domain().boundary_index_set();
        let mut interior: Vec<T> = (0..w.len()).map(|i| g[i] / (scale * self.bg.mass()[i])).collect();
        let boundary = b_idx.iter().enumerate().map(|(s, &i)| g[i] / (scale * two * self.bg.boundary_mass()[s])).collect();
        for &i in b_idx {
            interior[i] = T::zero();
        }
        Ok((Field::new(interior), BoundaryField::new(boundary)))
    }

    /// `ln Q(w + d) - ln Q(w)`, evaluated from the increment so that it
    /// keeps relative accuracy when `d` is tiny.
    pub fn log_quotient_change(&self, w: &[T], d: &[T]) -> Result<T> {
        let qp = self.parts(w)?;
        let ad = self.a_mat.matvec(d);
        let da = dot(w, &ad) * T::lit(2.0) + dot(d, &ad);
        let power_change = |x: T, dx: T| -> T {
            let r = dx / x;
            if !(r > -T::one()) {
                return -abs_pow(x, self.p);
            }
            abs_pow(x, self.p) * (self.p * r.ln_1p()).exp_m1()
        };
        let mut dl = (da / qp.a).ln_1p();
        if self.alpha != T::zero() {
            let dv: T = (0..w.len()).map(|i| self.vol_weight[i] * power_change(w[i], d[i])).sum();
            dl += self.alpha * (dv / qp.volume).ln_1p();
        }
        let b_idx = self.bg.domain().boundary_index_set();
        let ds: T = b_idx.iter().enumerate().map(|(s, &i)| self.bg.boundary_mass()[s] * power_change(w[i], d[i])).sum();
        dl -= self.beta * (ds / qp.boundary).ln_1p();
        if !dl.is_finite() {
            return Err(LabError::DivisionGuard("quotient change is not finite".into()));
        }
        Ok(dl)
    }

    /// Rescales `w` so that `B(w) = 1` (`B(c w) = c^{-2} B(w)`).
    pub fn normalize(&self, w: &mut [T]) -> Result<()> {
        let b = self.parts(w)?.b;
        let c = b.sqrt();
        for x in w.iter_mut() {
            *x *= c;
        }
        Ok(())
    }
}

fn signed_pow<T: Real>(x: T, e: T) -> T {
    if x == T::zero() {
        T::zero()
    } else {
        x.signum() * powr(x.abs(), e)
    }
}

pub fn escobar_a<T: Real>(bg: &SmmsBackground<T>, w: &[T]) -> T {
    Escobar::new(bg).a_value(w)
}

pub fn escobar_b<T: Real>(bg: &SmmsBackground<T>, w: &[T]) -> Result<T> {
    Ok(Escobar::new(bg).parts(w)?.b)
}

pub fn escobar_quotient<T: Real>(bg: &SmmsBackground<T>, w: &[T]) -> Result<T> {
    Escobar::new(bg).quotient(w)
}

pub fn el_residual<T: Real>(bg: &SmmsBackground<T>, w: &[T], q_value: T) -> Result<(Field<T>, BoundaryField<T>)> {
    Escobar::new(bg).el_residual(w, q_value)
}

#[derive(Debug, Clone, Serialize)]
pub struct QuotientReport<T> {
    pub a_value: T,
    pub b_value: T,
    pub q_value: T,
    pub el_interior_residual: T,
    pub el_boundary_residual: T,
    pub trial_id: String,
}

pub fn quotient_report<T: Real>(bg: &SmmsBackground<T>, w: &[T], trial_id: &str) -> Result<QuotientReport<T>> {
    let es = Escobar::new(bg);
    let qp = es.parts(w)?;
    let (ri, rb) = es.el_residual(w, qp.q)?;
    Ok(QuotientReport {
        a_value: qp.a,
        b_value: qp.b,
        q_value: qp.q,
        el_interior_residual: max_abs(&ri),
        el_boundary_residual: max_abs(&rb),
        trial_id: trial_id.to_string(),
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum MinimizeStatus {
    Converged,
    MaxIterations,
    /// The line search found no admissible decrease; the last accepted
    /// iterate and its quotient are reported.
    Stalled,
}

#[derive(Debug, Clone, Copy, Serialize)]
pub struct MinimizeStep<T> {
    pub iteration: usize,
    pub q: T,
    pub residual: T,
    pub step: T,
}

#[derive(Debug, Clone, Serialize)]
pub struct EscobarMinimum<T> {
    #[serde(skip)]
    pub w: ConformalFactor<T>,
    pub lambda_estimate: T,
    pub report: QuotientReport<T>,
    pub status: MinimizeStatus,
    pub history: Vec<MinimizeStep<T>>,
    /// Whether the positivity floor clipped the final iterate.
    pub floor_active: bool,
}

const FLOOR: f64 = 1e-12;
const LBFGS_MEMORY: usize = 8;

fn dot<T: Real>(a: &[T], b: &[T]) -> T {
    a.iter().zip(b).map(|(&x, &y)| x * y).sum()
}

/// Two-loop recursion, returning `-H g`.
fn lbfgs_direction<T: Real>(pre: &SpdSolver<T>, memory: &VecDeque<(Vec<T>, Vec<T>, T)>, g: &[T]) -> Result<Vec<T>> {
    let mut qv = g.to_vec();
    let mut alphas = Vec::with_capacity(memory.len());
    for (s, y, sy) in memory.iter().rev() {
        let a = dot(s, &qv) / *sy;
        for (x, &yy) in qv.iter_mut().zip(y) {
            *x -= a * yy;
        }
        alphas.push(a);
    }
    let mut r = pre.solve(&qv, None)?;
    if let Some((_, y, sy)) = memory.back() {
        let py = pre.solve(y, None)?;
        let gamma = *sy / dot(y, &py);
        for x in r.iter_mut() {
            *x *= gamma;
        }
    }
    for ((s, y, sy), a) in memory.iter().zip(alphas.into_iter().rev()) {
        let b = dot(y, &r) / *sy;
        for (x, &ss) in r.iter_mut().zip(s) {
            *x += (a - b) * ss;
        }
    }
    Ok(r.into_iter().map(|x| -x).collect())
}

/// Projected descent on `Q` over positive `w` with `B(w) = 1`. Directions
/// come from limited-memory BFGS whose initial inverse Hessian is the
/// inverse `W^{1,2}` Gram matrix `K + M + S` (plain preconditioned gradient
/// converges very slowly at nodes of small dual volume, such as `r = 0`).
/// Steps are accepted by an Armijo test, clipped at a positivity floor and
/// renormalized, so accepted `Q` values never increase.
pub fn minimize_escobar<T: Real>(
    bg: &SmmsBackground<T>,
    init: &ConformalFactor<T>,
    tol: T,
    max_iter: usize,
) -> Result<EscobarMinimum<T>> {
    let es = Escobar::new(bg);
    let mut d = bg.mass().to_vec();
    for (s, &i) in bg.domain().boundary_index_set().iter().enumerate() {
        d[i] += bg.boundary_mass()[s];
    }
    let pre = SpdSolver::new(&bg.stiffness().plus_diagonal(&d))?;
    let mut w = init.field().to_vec();
    es.normalize(&mut w)?;
    let residual_of = |w: &[T], q: T| -> Result<T> {
        let (a, b) = es.el_residual(w, q)?;
        Ok(max_abs(&a).max(max_abs(&b)))
    };
    let mut q = es.quotient(&w)?;
    let mut res = residual_of(&w, q)?;
    let mut history = vec![MinimizeStep { iteration: 0, q, residual: res, step: T::zero() }];
    let mut status = MinimizeStatus::MaxIterations;
    let mut floor_active = false;
    let mut memory: VecDeque<(Vec<T>, Vec<T>, T)> = VecDeque::with_capacity(LBFGS_MEMORY);
    let mut g = es.gradient(&w)?;
    for it in 1..=max_iter {
        if res <= tol {
            status = MinimizeStatus::Converged;
            break;
        }
        let mut dir = lbfgs_direction(&pre, &memory, &g)?;
        let mut slope: T = dot(&g, &dir);
        if !(slope < T::zero()) {
            memory.clear();
            dir = lbfgs_direction(&pre, &memory, &g)?;
            slope = dot(&g, &dir);
            if !(slope < T::zero()) {
                status = MinimizeStatus::Stalled;
                break;
            }
        }
        let mut t = T::one();
        let mut accepted = None;
        for _ in 0..60 {
            let mut trial: Vec<T> = w.iter().zip(&dir).map(|(&x, &s)| x + t * s).collect();
            let mut clipped = false;
            for x in trial.iter_mut() {
                if *x < T::lit(FLOOR) {
                    *x = T::lit(FLOOR);
                    clipped = true;
                }
            }
            let d: Vec<T> = trial.iter().zip(&w).map(|(&x, &y)| x - y).collect();
            if let Ok(dl) = es.log_quotient_change(&w, &d) {
                let dq = q * dl.exp_m1();
                if dq <= T::lit(1e-4) * t * slope {
                    es.normalize(&mut trial)?;
                    accepted = Some((trial, q + dq, clipped));
                    break;
                }
            }
            t /= T::lit(2.0);
        }
        let Some((trial, qt, clipped)) = accepted else {
            status = MinimizeStatus::Stalled;
            break;
        };
        let g_new = es.gradient(&trial)?;
        let sv: Vec<T> = trial.iter().zip(&w).map(|(&a, &b)| a - b).collect();
        let yv: Vec<T> = g_new.iter().zip(&g).map(|(&a, &b)| a - b).collect();
        let sy = dot(&sv, &yv);
        if sy > T::epsilon() * dot(&sv, &sv).sqrt() * dot(&yv, &yv).sqrt() {
            if memory.len() == LBFGS_MEMORY {
                memory.pop_front();
            }
            memory.push_back((sv, yv, sy));
        }
        w = trial;
        g = g_new;
        q = qt;
        floor_active = clipped;
        res = residual_of(&w, q)?;
        history.push(MinimizeStep { iteration: it, q, residual: res, step: t });
    }
    if status == MinimizeStatus::MaxIterations && res <= tol {
        status = MinimizeStatus::Converged;
    }
    let wf = ConformalFactor::new(Field::new(w))?;
    let report = quotient_report(bg, wf.field(), "minimizer")?;
    Ok(EscobarMinimum { lambda_estimate: q, w: wf, report, status, history, floor_active })
}

/// Name of the fixed trial family used by [`estimate_aubin_constant`].
pub const AUBIN_FAMILY: &str = "aubin-v1";

/// Bubble scales of the `aubin-v1` family.
pub const AUBIN_BUBBLE_SCALES: [f64; 4] = [0.5, 0.25, 0.125, 0.0625];
/// Widths of the Gaussian bumps of the `aubin-v1` family.
pub const AUBIN_BUMP_WIDTHS: [f64; 2] = [0.3, 0.6];

/// The `aubin-v1` trials on a domain: the constant, boundary bubbles
/// `(2s / ((s + d)^2 + x^2))^{k/2}` placed with [`DiscreteDomain::boundary_chart`],
/// and bumps `1 + exp(-(d^2 + x^2) / sigma^2)`.
pub fn aubin_trials<T: Real>(domain: &DiscreteDomain<T>) -> Vec<(String, Field<T>)> {
    let k = T::of(domain.dim_n()) + domain.dim_m() - T::lit(2.0);
    let chart: Vec<(T, T)> = (0..domain.node_count()).map(|i| domain.boundary_chart(i)).collect();
    let mut out = vec![("constant".to_string(), Field::constant(domain, T::one()))];
    for &s in &AUBIN_BUBBLE_SCALES {
        let s = T::lit(s);
        let f = chart.iter().map(|&(d, x)| powr(T::lit(2.0) * s / ((s + d) * (s + d) + x * x), k / T::lit(2.0))).collect();
        out.push((format!("bubble-{s}"), Field::new(f)));
    }
    for &sig in &AUBIN_BUMP_WIDTHS {
        let sig = T::lit(sig);
        let f = chart.iter().map(|&(d, x)| T::one() + (-(d * d + x * x) / (sig * sig)).exp()).collect();
        out.push((format!("bump-{sig}"), Field::new(f)));
    }
    out
}

#[derive(Debug, Clone, Serialize)]
pub struct AubinTrial<T> {
    pub id: String,
    pub required_c: T,
    /// `C_estimate - required_c`.
    pub slack: T,
}

#[derive(Debug, Clone, Serialize)]
pub struct AubinEstimate<T> {
    pub family: String,
    pub epsilon: T,
    pub c_estimate: T,
    pub trials: Vec<AubinTrial<T>>,
}

/// Smallest `C` for which
/// `S(w)^{(k+m)/(k+1)} <= V(w)^{m/(k+1)} ((1/Lambda + eps) int|grad w|^2 + C (int w^2 + int_boundary w^2))`
/// holds for one trial (all measures weighted as in `Q`).
pub fn aubin_required_c<T: Real>(bg: &SmmsBackground<T>, w: &[T], epsilon: T) -> Result<T> {
    let es = Escobar::new(bg);
    let qp = es.parts(w)?;
    let lam = lambda_mn(bg.dim_m(), bg.dim_n())?;
    let lead = T::one() / lam + epsilon;
    let grad = bg.domain().dirichlet_form(w, w, Some(bg.edge_density()));
    let l2: T = bg.mass().iter().zip(w).map(|(&m, &x)| m * x * x).sum::<T>()
        + bg.domain().boundary_index_set().iter().enumerate().map(|(s, &i)| bg.boundary_mass()[s] * w[i] * w[i]).sum::<T>();
    // S^beta / V^alpha = 1 / B
    Ok((T::one() / qp.b - lead * grad) / l2)
}

pub fn estimate_aubin_constant<T: Real>(bg: &SmmsBackground<T>, epsilon: T) -> Result<AubinEstimate<T>> {
    if !(epsilon > T::zero()) {
        return Err(LabError::InvalidInput(format!("epsilon must be positive, got {epsilon}")));
    }
    let trials = aubin_trials(bg.domain());
    estimate_aubin_constant_over(bg, epsilon, &trials)
}

/// Same as [`estimate_aubin_constant`] over a caller supplied family.
pub fn estimate_aubin_constant_over<T: Real>(
    bg: &SmmsBackground<T>,
    epsilon: T,
    family: &[(String, Field<T>)],
) -> Result<AubinEstimate<T>> {
    if family.is_empty() {
        return Err(LabError::InvalidInput("trial family is empty".into()));
    }
    let mut rows = Vec::with_capacity(family.len());
    for (id, w) in family {
        check_positive(w, id)?;
        rows.push((id.clone(), aubin_required_c(bg, w, epsilon)?));
    }
    let c_estimate = rows.iter().fold(T::neg_infinity(), |m, (_, c)| m.max(*c));
    let trials = rows.into_iter().map(|(id, c)| AubinTrial { id, required_c: c, slack: c_estimate - c }).collect();
    Ok(AubinEstimate { family: AUBIN_FAMILY.to_string(), epsilon, c_estimate, trials })
}
