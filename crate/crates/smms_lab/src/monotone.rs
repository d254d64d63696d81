//! Sub/supersolution machinery for the prescribed curvature system
//! `L w = R w^q` in M, `B w = H w^qb` on the boundary.
//!
//! All inequalities are checked on the finite volume rows of
//! [`SmmsBackground::yamabe_system`]: `F(u) <= 0` row by row makes `u` a
//! lower solution and `F(u) >= 0` an upper solution of the discrete system.
//! Since the matrix of `T` is an M-matrix under the bounds on `gamma` and
//! `rho`, `T` is exactly order preserving on the discrete level.

use serde::Serialize;

use crate::error::{LabError, Result};
use crate::grid::Field;
use crate::linalg::{BandLu, CsrMatrix, SpdSolver};
use crate::scalar::{max_abs, powr, Real};
use crate::smms::{check_positive, ConformalFactor, SmmsBackground};
use crate::spectral::{first_eigen_bar, first_eigen_lb};

#[derive(Debug, Clone, Copy, Serialize)]
pub struct SolverConfig<T> {
    pub gamma: T,
    pub rho: T,
    pub epsilon: T,
    pub delta: T,
    pub alpha: T,
    /// Stop when the max change between sweeps drops below this.
    pub tol: T,
    pub max_iter: usize,
}

const EIGEN_TOL: f64 = 1e-10;
const MAX_HALVINGS: usize = 20;

/// `gamma = 1.1 (n+m)/(2(n+m-1)) |R|_inf` (at least `1e-3`) and
/// `rho = inf H / (n+m-1)`.
pub fn choose_gamma_rho<T: Real>(bg: &SmmsBackground<T>) -> (T, T) {
    let c = bg.coefficients();
    let bound = (c.n + c.m) / (T::lit(2.0) * c.nm1) * max_abs(bg.weighted_scalar_curvature());
    let gamma = (T::lit(1.1) * bound).max(T::lit(1e-3));
    let h = bg.weighted_mean_curvature();
    let rho = if h.is_empty() { T::zero() } else { h.iter().fold(T::infinity(), |a, &b| a.min(b)) / c.nm1 };
    (gamma, rho)
}

impl<T: Real> SolverConfig<T> {
    pub fn for_background(bg: &SmmsBackground<T>) -> Self {
        let (gamma, rho) = choose_gamma_rho(bg);
        let epsilon = T::lit(0.1);
        let k = bg.coefficients().k;
        SolverConfig {
            gamma,
            rho,
            epsilon,
            delta: T::lit(0.5),
            alpha: T::one() - powr(epsilon, T::lit(2.0) / k),
            tol: T::lit(1e-13),
            max_iter: 200_000,
        }
    }
}

/// The linear map `T`: `psi = T(v)` solves
/// `Lap_phi psi - gamma psi = -gamma v + a R (v - v^q)` in M and
/// `d psi/d nu - rho psi = -rho v + b H (v^qb - v)` on the boundary, with
/// `a = (n+m-2)/(4(n+m-1))`, `b = (n+m-2)/(2(n+m-1))`.
pub struct TOperator<T> {
    solver: SpdSolver<T>,
    gamma: T,
    rho: T,
    a: T,
    b: T,
}

impl<T: Real> TOperator<T> {
    pub fn new(bg: &SmmsBackground<T>, cfg: &SolverConfig<T>) -> Result<Self> {
        let c = bg.coefficients();
        if !(cfg.gamma > T::zero()) {
            return Err(LabError::InvalidInput(format!("gamma must be positive, got {}", cfg.gamma)));
        }
        let mut d: Vec<T> = bg.mass().iter().map(|&m| cfg.gamma * m).collect();
        for (s, &i) in bg.domain().boundary_index_set().iter().enumerate() {
            d[i] -= cfg.rho * bg.boundary_mass()[s];
        }
        let p = bg.stiffness().plus_diagonal(&d);
        let solver = SpdSolver::new(&p).map_err(|e| LabError::SolverFailure(format!("operator T: {e}")))?;
        Ok(TOperator { solver, gamma: cfg.gamma, rho: cfg.rho, a: c.k / (T::lit(4.0) * c.nm1), b: c.k / (T::lit(2.0) * c.nm1) })
    }

    pub fn apply(&self, bg: &SmmsBackground<T>, v: &[T], guess: Option<&[T]>) -> Result<Field<T>> {
        if let Some(i) = v.iter().position(|&x| !(x >= T::zero()) || !x.is_finite()) {
            return Err(LabError::Positivity(format!("T needs v >= 0, got {} at node {i}", v[i])));
        }
        let c = bg.coefficients();
        let r = bg.weighted_scalar_curvature();
        let h = bg.weighted_mean_curvature();
        let mut rhs: Vec<T> =
            (0..v.len()).map(|i| bg.mass()[i] * (self.gamma * v[i] - self.a * r[i] * (v[i] - pow0(v[i], c.q)))).collect();
        for (s, &i) in bg.domain().boundary_index_set().iter().enumerate() {
            rhs[i] += bg.boundary_mass()[s] * (-self.rho * v[i] + self.b * h[s] * (pow0(v[i], c.qb) - v[i]));
        }
        Ok(Field::new(self.solver.solve(&rhs, guess.or(Some(v)))?))
    }
}

fn pow0<T: Real>(x: T, e: T) -> T {
    if x == T::zero() {
        T::zero()
    } else {
        powr(x, e)
    }
}

/// One application of `T` (builds the operator each call; use
/// [`TOperator`] to reuse the factorization).
pub fn apply_t<T: Real>(bg: &SmmsBackground<T>, cfg: &SolverConfig<T>, v: &[T]) -> Result<Field<T>> {
    TOperator::new(bg, cfg)?.apply(bg, v, None)
}

/// Row-sign check of `F(u)`: returns the worst offending row value.
fn sign_violation<T: Real>(bg: &SmmsBackground<T>, u: &[T], lower: bool) -> Option<(usize, T)> {
    let f = bg.yamabe_system(u);
    let scale = f.iter().fold(T::zero(), |m, &x| m.max(x.abs())).max(T::min_positive_value());
    let slack = T::lit(1e-13) * scale;
    let s = if lower { T::one() } else { -T::one() };
    let mut worst: Option<(usize, T)> = None;
    for (i, &fi) in f.iter().enumerate() {
        let v = s * fi;
        let is_boundary = bg.domain().boundary_slot(i).is_some();
        let bad = if is_boundary { v > slack } else { v >= T::zero() };
        if bad && worst.is_none_or(|(_, w)| v > w) {
            worst = Some((i, fi));
        }
    }
    worst
}

#[derive(Debug, Clone, Serialize)]
pub struct BracketEnd<T> {
    #[serde(skip)]
    pub field: Field<T>,
    /// Accepted `epsilon` (lower) or `delta` (upper).
    pub scale: T,
    /// `alpha` for the lower solution, unused (0) for the upper one.
    pub alpha: T,
    pub halvings: usize,
    pub eigenvalue: T,
}

/// `u0 = epsilon phi1^alpha`, `alpha = 1 - epsilon^{2/(n+m-2)}`, with
/// `phi1` the first `(L, B)` eigenfunction; `epsilon` is halved until every
/// row satisfies the lower-solution inequality.
pub fn build_lower_solution<T: Real>(bg: &SmmsBackground<T>, epsilon: T) -> Result<BracketEnd<T>> {
    if !(epsilon > T::zero() && epsilon < T::one()) {
        return Err(LabError::InvalidInput(format!("epsilon must lie in (0, 1), got {epsilon}")));
    }
    let eig = first_eigen_lb(bg, T::lit(EIGEN_TOL))?;
    if !(eig.lambda1 < T::zero()) {
        return Err(LabError::Hypothesis(format!("lambda1(L, B) = {} is not negative", eig.lambda1)));
    }
    let k = bg.coefficients().k;
    let mut eps = epsilon;
    let mut last = None;
    for halvings in 0..=MAX_HALVINGS {
        let alpha = T::one() - powr(eps, T::lit(2.0) / k);
        let u: Vec<T> = eig.eigenfunction.iter().map(|&p| eps * powr(p, alpha)).collect();
        match sign_violation(bg, &u, true) {
            None => return Ok(BracketEnd { field: Field::new(u), scale: eps, alpha, halvings, eigenvalue: eig.lambda1 }),
            Some(v) => last = Some(v),
        }
        eps /= T::lit(2.0);
    }
    let (i, v) = last.expect("at least one attempt");
    Err(LabError::Construction(format!(
        "no admissible epsilon after {MAX_HALVINGS} halvings (last epsilon {}, row {i} has F = {v})",
        eps * T::lit(2.0)
    )))
}

/// `wbar = 1 - delta f1` with `f1` the first `(Lbar, Bbar)` eigenfunction;
/// `delta` is halved until every row satisfies the upper-solution inequality.
pub fn build_upper_solution<T: Real>(bg: &SmmsBackground<T>, delta: T) -> Result<BracketEnd<T>> {
    if !(delta > T::zero() && delta < T::one()) {
        return Err(LabError::InvalidInput(format!("delta must lie in (0, 1), got {delta}")));
    }
    let eig = first_eigen_bar(bg, T::lit(EIGEN_TOL))?;
    if !(eig.lambda1 < T::zero()) {
        return Err(LabError::Hypothesis(format!("lambda1(Lbar, Bbar) = {} is not negative", eig.lambda1)));
    }
    let mut d = delta;
    let mut last = None;
    for halvings in 0..=MAX_HALVINGS {
        let w: Vec<T> = eig.eigenfunction.iter().map(|&f| T::one() - d * f).collect();
        match sign_violation(bg, &w, false) {
            None => {
                return Ok(BracketEnd { field: Field::new(w), scale: d, alpha: T::zero(), halvings, eigenvalue: eig.lambda1 })
            }
            Some(v) => last = Some(v),
        }
        d /= T::lit(2.0);
    }
    let (i, v) = last.expect("at least one attempt");
    Err(LabError::Construction(format!(
        "no admissible delta after {MAX_HALVINGS} halvings (last delta {}, row {i} has F = {v})",
        d * T::lit(2.0)
    )))
}

#[derive(Debug, Clone, Serialize)]
pub struct MonotoneResult<T> {
    #[serde(skip)]
    pub solution: ConformalFactor<T>,
    pub iterations: usize,
    pub residual: T,
    /// Max change of every sweep.
    pub changes: Vec<T>,
}

const BRACKET_SLACK: f64 = 1e-12;

/// Iterates `u_{k+1} = T(u_k)` from the upper solution. Every sweep is
/// checked to be componentwise nonincreasing and to stay in the bracket.
pub fn monotone_iterate<T: Real>(
    bg: &SmmsBackground<T>,
    cfg: &SolverConfig<T>,
    lower: &[T],
    upper: &[T],
) -> Result<MonotoneResult<T>> {
    let nn = bg.domain().node_count();
    if lower.len() != nn || upper.len() != nn {
        return Err(LabError::InvalidInput("bracket fields have the wrong length".into()));
    }
    if let Some(i) = (0..nn).find(|&i| lower[i] > upper[i]) {
        return Err(LabError::InvalidInput(format!("lower > upper at node {i}")));
    }
    let op = TOperator::new(bg, cfg)?;
    let slack = T::lit(BRACKET_SLACK);
    let mut u = upper.to_vec();
    let mut changes = Vec::new();
    for it in 1..=cfg.max_iter {
        let next = op.apply(bg, &u, Some(&u))?.into_inner();
        let mut change = T::zero();
        for i in 0..nn {
            if next[i] > u[i] + slack {
                return Err(LabError::Invariant(format!("iterate {it} increased at node {i}: {} -> {}", u[i], next[i])));
            }
            if next[i] < lower[i] - slack || next[i] > upper[i] + slack {
                return Err(LabError::Invariant(format!("iterate {it} left the bracket at node {i}")));
            }
            change = change.max((next[i] - u[i]).abs());
        }
        u = next;
        changes.push(change);
        if change <= cfg.tol {
            let solution = ConformalFactor::new(Field::new(u))?;
            let residual = bg.yamabe_residual_norm(&solution);
            return Ok(MonotoneResult { solution, iterations: it, residual, changes });
        }
    }
    Err(LabError::NonConvergence(format!(
        "monotone iteration did not reach change {} in {} sweeps (last {})",
        cfg.tol,
        cfg.max_iter,
        changes.last().copied().unwrap_or(T::nan())
    )))
}

#[derive(Debug, Clone, Serialize)]
pub struct NewtonResult<T> {
    #[serde(skip)]
    pub solution: ConformalFactor<T>,
    pub iterations: usize,
    pub residual: T,
}

fn jacobian<T: Real>(bg: &SmmsBackground<T>, w: &[T]) -> CsrMatrix<T> {
    let c = bg.coefficients();
    let r = bg.weighted_scalar_curvature();
    let h = bg.weighted_mean_curvature();
    let mut d: Vec<T> = (0..w.len()).map(|i| bg.mass()[i] * r[i] * (T::one() - c.q * powr(w[i], c.q - T::one()))).collect();
    for (s, &i) in bg.domain().boundary_index_set().iter().enumerate() {
        d[i] += T::lit(2.0) * bg.boundary_mass()[s] * h[s] * (T::one() - c.qb * powr(w[i], c.qb - T::one()));
    }
    let nn = w.len();
    bg.stiffness().scaled(&vec![c.c; nn], &vec![T::one(); nn]).plus_diagonal(&d)
}

fn scaled_merit<T: Real>(bg: &SmmsBackground<T>, w: &[T]) -> (T, T) {
    let f = bg.yamabe_system(w);
    let (a, b) = bg.normalize_rows(&f);
    let two = a.iter().chain(b.iter()).map(|&x| x * x).sum::<T>();
    (two, max_abs(&a).max(max_abs(&b)))
}

/// Damped Newton on the finite volume system with an Armijo backtracking
/// on the squared row-normalized residual; iterates stay positive.
pub fn damped_newton<T: Real>(bg: &SmmsBackground<T>, start: &[T], tol: T, max_iter: usize) -> Result<NewtonResult<T>> {
    check_positive(start, "Newton start")?;
    let mut w = start.to_vec();
    let (mut merit, mut res) = scaled_merit(bg, &w);
    for it in 0..=max_iter {
        if res <= tol {
            let solution = ConformalFactor::new(Field::new(w))?;
            return Ok(NewtonResult { solution, iterations: it, residual: res });
        }
        if it == max_iter {
            break;
        }
        let f = bg.yamabe_system(&w);
        let lu = BandLu::factor(&jacobian(bg, &w))?;
        let step = lu.solve(&f.iter().map(|&x| -x).collect::<Vec<_>>());
        let mut t = T::one();
        loop {
            let trial: Vec<T> = w.iter().zip(&step).map(|(&a, &b)| a + t * b).collect();
            if trial.iter().all(|&x| x > T::zero()) {
                let (m2, r2) = scaled_merit(bg, &trial);
                if m2 <= (T::one() - T::lit(1e-4) * t) * merit {
                    w = trial;
                    merit = m2;
                    res = r2;
                    break;
                }
            }
            t /= T::lit(2.0);
            if t < T::lit(1e-12) {
                return Err(LabError::SolverFailure(format!("Newton line search failed at iteration {it} (residual {res})")));
            }
        }
    }
    Err(LabError::NonConvergence(format!("Newton did not reach {tol} in {max_iter} iterations (residual {res})")))
}

#[derive(Debug, Clone, Serialize)]
pub struct HypothesisReport<T> {
    pub max_mean_curvature: T,
    pub mean_curvature_nonpositive: bool,
    pub lambda1_lb: T,
    pub lambda1_lb_negative: bool,
    pub lambda1_bar: T,
    pub lambda1_bar_negative: bool,
}

impl<T: Real> HypothesisReport<T> {
    pub fn all_hold(&self) -> bool {
        self.mean_curvature_nonpositive && self.lambda1_lb_negative && self.lambda1_bar_negative
    }

    pub fn failures(&self) -> Vec<&'static str> {
        let mut out = Vec::new();
        if !self.mean_curvature_nonpositive {
            out.push("H^m <= 0 fails");
        }
        if !self.lambda1_lb_negative {
            out.push("lambda1(L, B) < 0 fails");
        }
        if !self.lambda1_bar_negative {
            out.push("lambda1(Lbar, Bbar) < 0 fails");
        }
        out
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct SmallerMetric<T> {
    pub hypotheses: HypothesisReport<T>,
    pub lower: BracketEnd<T>,
    pub upper: BracketEnd<T>,
    pub result: MonotoneResult<T>,
}

#[derive(Debug, Clone, Serialize)]
#[serde(tag = "status", rename_all = "snake_case")]
pub enum SmallerMetricOutcome<T> {
    Found(Box<SmallerMetric<T>>),
    Refused { hypotheses: HypothesisReport<T>, failed: Vec<&'static str> },
}

pub fn check_hypotheses<T: Real>(bg: &SmmsBackground<T>) -> Result<HypothesisReport<T>> {
    let h = bg.weighted_mean_curvature();
    let hmax = h.iter().fold(T::neg_infinity(), |a, &b| a.max(b));
    let l1 = first_eigen_lb(bg, T::lit(EIGEN_TOL))?.lambda1;
    let l2 = first_eigen_bar(bg, T::lit(EIGEN_TOL))?.lambda1;
    Ok(HypothesisReport {
        max_mean_curvature: hmax,
        mean_curvature_nonpositive: h.is_empty() || hmax <= T::zero(),
        lambda1_lb: l1,
        lambda1_lb_negative: l1 < T::zero(),
        lambda1_bar: l2,
        lambda1_bar_negative: l2 < T::zero(),
    })
}

/// Checks `H^m <= 0`, `lambda1(L, B) < 0`, `lambda1(Lbar, Bbar) < 0`, builds
/// the bracket and iterates to a conformal factor `0 < w < 1` solving the
/// system, or refuses naming the failed hypotheses.
pub fn find_smaller_metric<T: Real>(bg: &SmmsBackground<T>) -> Result<SmallerMetricOutcome<T>> {
    find_smaller_metric_with(bg, SolverConfig::for_background(bg))
}

pub fn find_smaller_metric_with<T: Real>(bg: &SmmsBackground<T>, mut cfg: SolverConfig<T>) -> Result<SmallerMetricOutcome<T>> {
    let hypotheses = check_hypotheses(bg)?;
    if !hypotheses.all_hold() {
        let failed = hypotheses.failures();
        return Ok(SmallerMetricOutcome::Refused { hypotheses, failed });
    }
    let upper = build_upper_solution(bg, cfg.delta)?;
    let mut lower = build_lower_solution(bg, cfg.epsilon)?;
    let mut tries = 0;
    while (0..lower.field.len()).any(|i| lower.field[i] >= upper.field[i]) {
        tries += 1;
        if tries > MAX_HALVINGS {
            return Err(LabError::Construction("could not order the lower below the upper solution".into()));
        }
        lower = build_lower_solution(bg, lower.scale / T::lit(2.0))?;
    }
    cfg.epsilon = lower.scale;
    cfg.alpha = lower.alpha;
    cfg.delta = upper.scale;
    let result = monotone_iterate(bg, &cfg, &lower.field, &upper.field)?;
    Ok(SmallerMetricOutcome::Found(Box::new(SmallerMetric { hypotheses, lower, upper, result })))
}
