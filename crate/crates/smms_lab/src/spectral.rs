//! First eigenvalues of the two Robin problems and the integral sign
//! criteria that certify their sign.

use serde::Serialize;

use crate::error::{LabError, Result};
use crate::grid::Field;
use crate::linalg::{BandLdl, CsrMatrix};
use crate::scalar::{max_abs, Real};
use crate::smms::SmmsBackground;

#[derive(Debug, Clone, Serialize)]
pub struct SpectralResult<T> {
    pub lambda1: T,
    /// Normalized to `max = 1`; strictly positive.
    #[serde(skip)]
    pub eigenfunction: Field<T>,
    pub iterations: usize,
    /// `max |M^{-1} A u - lambda u|` for the normalized eigenfunction. The
    /// requested tolerance is raised to the rounding floor
    /// `32 eps max_i sum_j |A_ij| / M_i` when it lies below it.
    pub residual: T,
    /// Final certified shift (below `lambda1`).
    pub shift: T,
}

const MAX_ITER: usize = 2000;

/// Smallest eigenvalue of `A u = lambda diag(mass) u` for symmetric `A` and
/// positive `mass`, by shifted inverse iteration. The shift starts below the
/// Gershgorin bound and moves up toward the Rayleigh quotient only when a
/// positive definite `LDL^T` factorization certifies it stays below the
/// spectrum.
pub fn generalized_first_eigen<T: Real>(a: &CsrMatrix<T>, mass: &[T], tol: T) -> Result<SpectralResult<T>> {
    let n = a.dim();
    if mass.len() != n || mass.iter().any(|&m| !(m > T::zero())) {
        return Err(LabError::InvalidInput("eigen mass must be positive on every node".into()));
    }
    let isq: Vec<T> = mass.iter().map(|&m| T::one() / m.sqrt()).collect();
    let c = a.scaled(&isq, &isq);
    let g = c.gershgorin_lower();
    let scale = T::one().max(g.abs());
    let mut margin = T::lit(1e-3) * scale;
    let mut sigma = g - margin;
    let mut fact = shifted(&c, sigma);
    let mut tries = 0;
    while !fact.is_positive_definite() {
        tries += 1;
        if tries > 60 {
            return Err(LabError::SolverFailure("could not place a shift below the spectrum".into()));
        }
        margin *= T::lit(2.0);
        sigma = g - margin;
        fact = shifted(&c, sigma);
    }
    let mut x: Vec<T> = mass.iter().map(|&m| m.sqrt()).collect();
    normalize(&mut x);
    // attainable accuracy of the residual itself
    let floor = T::lit(32.0) * T::epsilon() * a.scaled_row_norm(mass);
    let tol = tol.max(floor);
    let mut last_res = T::infinity();
    for it in 1..=MAX_ITER {
        let mut y = fact.solve(&x);
        if y.iter().any(|v| !v.is_finite()) {
            return Err(LabError::SolverFailure(format!("inverse iteration diverged at iteration {it}")));
        }
        normalize(&mut y);
        x = y;
        let cx = c.matvec(&x);
        let rho: T = cx.iter().zip(&x).map(|(&p, &q)| p * q).sum();
        let r: Vec<T> = cx.iter().zip(&x).map(|(&p, &q)| p - rho * q).collect();
        let u: Vec<T> = x.iter().zip(&isq).map(|(&p, &s)| p * s).collect();
        let umax = max_abs(&u);
        let res_u = r.iter().zip(&isq).fold(T::zero(), |m, (&p, &s)| m.max((p * s).abs())) / umax;
        last_res = res_u;
        if res_u <= tol {
            let sign = if u.iter().copied().sum::<T>() < T::zero() { -T::one() } else { T::one() };
            let ef: Vec<T> = u.iter().map(|&v| sign * v / umax).collect();
            if let Some(i) = ef.iter().position(|&v| !(v > T::zero())) {
                return Err(LabError::SolverFailure(format!("first eigenfunction not positive at node {i} (value {})", ef[i])));
            }
            return Ok(SpectralResult {
                lambda1: rho,
                eigenfunction: Field::new(ef),
                iterations: it,
                residual: res_u,
                shift: sigma,
            });
        }
        let rnorm = r.iter().map(|&v| v * v).sum::<T>().sqrt();
        let candidate = rho - T::lit(2.0) * rnorm - T::lit(1e-13) * (T::one() + rho.abs());
        if candidate > sigma {
            let f2 = shifted(&c, candidate);
            if f2.is_positive_definite() {
                sigma = candidate;
                fact = f2;
            }
        }
    }
    Err(LabError::NonConvergence(format!("inverse iteration stopped after {MAX_ITER} iterations with residual {last_res}")))
}

fn shifted<T: Real>(c: &CsrMatrix<T>, sigma: T) -> BandLdl<T> {
    let d = vec![-sigma; c.dim()];
    BandLdl::factor(&c.plus_diagonal(&d))
}

fn normalize<T: Real>(x: &mut [T]) {
    let s = x.iter().map(|&v| v * v).sum::<T>().sqrt();
    for v in x.iter_mut() {
        *v /= s;
    }
}

/// First eigenpair of `(L, B)`: minimizer of
/// `(int c|grad u|^2 + R u^2 + 2 int_boundary H u^2) / int u^2`.
pub fn first_eigen_lb<T: Real>(bg: &SmmsBackground<T>, tol: T) -> Result<SpectralResult<T>> {
    generalized_first_eigen(&bg.lb_matrix(), bg.mass(), tol)
}

/// First eigenpair of `(Lbar, Bbar)`: `-Lap_phi psi - R psi/(n+m-1) = lambda psi`,
/// `d psi/d nu = H psi/(n+m-1)`, with no boundary mass term.
pub fn first_eigen_bar<T: Real>(bg: &SmmsBackground<T>, tol: T) -> Result<SpectralResult<T>> {
    generalized_first_eigen(&bg.barred_matrix(), bg.mass(), tol)
}

/// Rayleigh quotient `u^T A u / u^T M u`.
pub fn rayleigh_quotient<T: Real>(a: &CsrMatrix<T>, mass: &[T], u: &[T]) -> T {
    let num = a.quadratic_form(u);
    let den: T = mass.iter().zip(u).map(|(&m, &v)| m * v * v).sum();
    num / den
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Verdict {
    NegativeCertified,
    Inconclusive,
}

#[derive(Debug, Clone, Copy, Serialize)]
pub struct SignCriterion<T> {
    pub verdict: Verdict,
    /// The integral the hypothesis is stated for.
    pub integral: T,
}

/// Threshold below which both curvatures count as vanishing.
pub const VANISHING_THRESHOLD: f64 = 1e-10;

fn curvature_integrals<T: Real>(bg: &SmmsBackground<T>) -> Result<(T, T, T)> {
    let r = bg.weighted_scalar_curvature();
    let h = bg.weighted_mean_curvature();
    let eps = T::lit(VANISHING_THRESHOLD);
    if max_abs(r) <= eps && max_abs(h) <= eps {
        return Err(LabError::Hypothesis("R^m and H^m vanish simultaneously".into()));
    }
    let ir = bg.integrate(r);
    let ih = bg.integrate_boundary(h);
    let mut abs_scale = T::zero();
    for (&m, &v) in bg.mass().iter().zip(r.iter()) {
        abs_scale += m * v.abs();
    }
    for (&s, &v) in bg.boundary_mass().iter().zip(h.iter()) {
        abs_scale += s * v.abs();
    }
    Ok((ir, ih, abs_scale))
}

/// If `int R^m + int_boundary H^m >= 0` then `lambda1(Lbar, Bbar) < 0`.
pub fn criterion_bar_sign<T: Real>(bg: &SmmsBackground<T>) -> Result<SignCriterion<T>> {
    let (ir, ih, scale) = curvature_integrals(bg)?;
    let integral = ir + ih;
    let slack = T::lit(1e-12) * scale;
    let verdict = if integral >= -slack { Verdict::NegativeCertified } else { Verdict::Inconclusive };
    Ok(SignCriterion { verdict, integral })
}

/// If `int R^m + 2 int_boundary H^m <= 0` then `lambda1(L, B) < 0`.
pub fn criterion_lb_sign<T: Real>(bg: &SmmsBackground<T>) -> Result<SignCriterion<T>> {
    let (ir, ih, scale) = curvature_integrals(bg)?;
    let integral = ir + T::lit(2.0) * ih;
    let slack = T::lit(1e-12) * scale;
    let verdict = if integral <= slack { Verdict::NegativeCertified } else { Verdict::Inconclusive };
    Ok(SignCriterion { verdict, integral })
}
