//! Smooth metric measure spaces with boundary on a discrete domain: the
//! weighted curvatures, the conformal operators and the transformation laws.
//!
//! Sign convention: `H` is the trace of the second fundamental form with
//! respect to the outward normal (the unit sphere has `H = n - 1`) and the
//! weighted mean curvature is `H^m_phi = H_g - d(phi)/d(nu)`. This is the
//! sign for which the boundary transformation law
//! `H^m_phi = w^{-(k+2)/k} B w` holds with `B = (c/2) d/d(nu) + H^m_phi0`.

use std::sync::Arc;

use crate::error::{LabError, Result};
use crate::grid::{BoundaryField, DiscreteDomain, Field};
use crate::linalg::CsrMatrix;
use crate::scalar::{max_abs, powr, Real};

/// The exponents and coefficients that recur in every formula, all derived
/// from `n + m`. Here `k = n + m - 2`.
#[derive(Debug, Clone, Copy)]
pub struct Coefficients<T> {
    pub n: T,
    pub m: T,
    pub k: T,
    /// `4 (n + m - 1) / (n + m - 2)`, the gradient coefficient of `L`.
    pub c: T,
    /// `(n + m + 2) / (n + m - 2)`, interior nonlinearity.
    pub q: T,
    /// `(n + m) / (n + m - 2)`, boundary nonlinearity.
    pub qb: T,
    /// `n + m - 1`.
    pub nm1: T,
    /// `2 (m + n - 1) / (m + n - 2)`, the critical exponent.
    pub p: T,
}

impl<T: Real> Coefficients<T> {
    pub fn new(n: usize, m: T) -> Result<Self> {
        let nn = T::of(n);
        let k = nn + m - T::lit(2.0);
        if !(k > T::zero()) {
            return Err(LabError::InvalidInput(format!("n + m must exceed 2, got n = {n}, m = {m}")));
        }
        let nm1 = k + T::one();
        Ok(Coefficients {
            n: nn,
            m,
            k,
            c: T::lit(4.0) * nm1 / k,
            q: (k + T::lit(4.0)) / k,
            qb: (k + T::lit(2.0)) / k,
            nm1,
            p: T::lit(2.0) * nm1 / k,
        })
    }

    /// Volume multiplier exponent `2(k+2)/k` of the conformal change.
    pub fn vol_exp(&self) -> T {
        T::lit(2.0) * (self.k + T::lit(2.0)) / self.k
    }

    /// Area multiplier exponent `2(k+1)/k`.
    pub fn area_exp(&self) -> T {
        T::lit(2.0) * (self.k + T::one()) / self.k
    }
}

#[derive(Debug, Clone)]
pub struct SmmsBackground<T> {
    domain: Arc<DiscreteDomain<T>>,
    coef: Coefficients<T>,
    phi0: Field<T>,
    r_g0: Field<T>,
    h_g0: BoundaryField<T>,
    r_m: Field<T>,
    h_m: BoundaryField<T>,
    mass_phi: Vec<T>,
    bweight_phi: Vec<T>,
    edge_phi: Vec<T>,
    stiffness: CsrMatrix<T>,
}

/// A strictly positive conformal factor `w`, `g = w^{4/k} g0`.
#[derive(Debug, Clone, PartialEq)]
pub struct ConformalFactor<T> {
    w: Field<T>,
}

impl<T: Real> ConformalFactor<T> {
    pub fn new(w: Field<T>) -> Result<Self> {
        check_positive(&w, "conformal factor")?;
        Ok(ConformalFactor { w })
    }
    pub fn field(&self) -> &Field<T> {
        &self.w
    }
    pub fn into_field(self) -> Field<T> {
        self.w
    }
}

pub(crate) fn check_positive<T: Real>(w: &[T], what: &str) -> Result<()> {
    if let Some((i, x)) = w.iter().enumerate().find(|(_, &x)| !(x > T::zero()) || !x.is_finite()) {
        return Err(LabError::Positivity(format!("{what} is {x} at node {i}")));
    }
    Ok(())
}

/// `R^m_phi = R + 2 Lap(phi) - ((m+1)/m) |grad phi|^2`; for `m = 0` the
/// density must vanish and `R` is returned unchanged.
pub fn weighted_scalar_curvature_of<T: Real>(domain: &DiscreteDomain<T>, m: T, phi: &[T], r_g: &[T]) -> Result<Field<T>> {
    if m == T::zero() {
        require_flat_density(phi)?;
        return Ok(Field::new(r_g.to_vec()));
    }
    let lap = domain.laplacian(phi);
    let g2 = domain.gradient_inner(phi, phi);
    let f = (m + T::one()) / m;
    Ok(Field::new((0..phi.len()).map(|i| r_g[i] + T::lit(2.0) * lap[i] - f * g2[i]).collect()))
}

/// `H^m_phi = H - d(phi)/d(nu)`.
pub fn weighted_mean_curvature_of<T: Real>(domain: &DiscreteDomain<T>, m: T, phi: &[T], h_g: &[T]) -> Result<BoundaryField<T>> {
    if m == T::zero() {
        require_flat_density(phi)?;
        return Ok(BoundaryField::new(h_g.to_vec()));
    }
    let dn = domain.normal_derivative(phi);
    Ok(BoundaryField::new(h_g.iter().zip(dn.iter()).map(|(&h, &d)| h - d).collect()))
}

fn require_flat_density<T: Real>(phi: &[T]) -> Result<()> {
    if max_abs(phi) > T::zero() {
        return Err(LabError::InvalidInput("m = 0 requires phi0 identically 0".into()));
    }
    Ok(())
}

impl<T: Real> SmmsBackground<T> {
    /// Builds the background and caches its weighted measures, curvatures
    /// and the weighted stiffness matrix. `n` and `m` come from the domain.
    pub fn new(domain: Arc<DiscreteDomain<T>>, phi0: Field<T>, r_g0: Field<T>, h_g0: BoundaryField<T>) -> Result<Self> {
        let nn = domain.node_count();
        if phi0.len() != nn || r_g0.len() != nn {
            return Err(LabError::InvalidInput(format!(
                "fields must have {nn} values, got phi0 {} and R_g0 {}",
                phi0.len(),
                r_g0.len()
            )));
        }
        if h_g0.len() != domain.boundary_count() {
            return Err(LabError::InvalidInput(format!("H_g0 must have {} values, got {}", domain.boundary_count(), h_g0.len())));
        }
        for (name, v) in [("phi0", &phi0.values), ("R_g0", &r_g0.values), ("H_g0", &h_g0.values)] {
            if v.iter().any(|x| !x.is_finite()) {
                return Err(LabError::InvalidInput(format!("{name} has non-finite values")));
            }
        }
        let m = domain.dim_m();
        let coef = Coefficients::new(domain.dim_n(), m)?;
        let r_m = weighted_scalar_curvature_of(&domain, m, &phi0, &r_g0)?;
        let h_m = weighted_mean_curvature_of(&domain, m, &phi0, &h_g0)?;
        let mass_phi: Vec<T> = domain.node_mass().iter().zip(phi0.iter()).map(|(&mu, &f)| mu * (-f).exp()).collect();
        let bweight_phi: Vec<T> =
            domain.boundary_weight().iter().zip(domain.boundary_index_set()).map(|(&s, &i)| s * (-phi0[i]).exp()).collect();
        let half = T::lit(0.5);
        let edge_phi: Vec<T> = domain.edges().iter().map(|e| (-(phi0[e.i] + phi0[e.j]) * half).exp()).collect();
        let mut trip = Vec::with_capacity(4 * domain.edges().len());
        for (e, ed) in domain.edges().iter().enumerate() {
            let c = ed.coef * edge_phi[e];
            trip.push((ed.i, ed.i, c));
            trip.push((ed.j, ed.j, c));
            trip.push((ed.i, ed.j, -c));
            trip.push((ed.j, ed.i, -c));
        }
        for i in 0..nn {
            trip.push((i, i, T::zero()));
        }
        let stiffness = CsrMatrix::from_triplets(nn, trip);
        Ok(SmmsBackground { domain, coef, phi0, r_g0, h_g0, r_m, h_m, mass_phi, bweight_phi, edge_phi, stiffness })
    }

    /// Background with density `phi0 = 0`, so `R^m = R_g0` and `H^m = H_g0`.
    pub fn unweighted(domain: Arc<DiscreteDomain<T>>, r_g0: Field<T>, h_g0: BoundaryField<T>) -> Result<Self> {
        let phi0 = Field::constant(&domain, T::zero());
        Self::new(domain, phi0, r_g0, h_g0)
    }

    pub fn domain(&self) -> &DiscreteDomain<T> {
        &self.domain
    }
    pub fn domain_arc(&self) -> Arc<DiscreteDomain<T>> {
        Arc::clone(&self.domain)
    }
    pub fn dim_n(&self) -> usize {
        self.domain.dim_n()
    }
    pub fn dim_m(&self) -> T {
        self.coef.m
    }
    pub fn coefficients(&self) -> &Coefficients<T> {
        &self.coef
    }
    pub fn phi0(&self) -> &Field<T> {
        &self.phi0
    }
    pub fn r_g0(&self) -> &Field<T> {
        &self.r_g0
    }
    pub fn h_g0(&self) -> &BoundaryField<T> {
        &self.h_g0
    }
    /// Weighted node masses `M_i e^{-phi0_i}`.
    pub fn mass(&self) -> &[T] {
        &self.mass_phi
    }
    /// Weighted boundary weights `S_b e^{-phi0_b}`.
    pub fn boundary_mass(&self) -> &[T] {
        &self.bweight_phi
    }
    /// Per-edge density factors `e^{-(phi_i + phi_j)/2}`.
    pub fn edge_density(&self) -> &[T] {
        &self.edge_phi
    }
    /// Weighted stiffness `K^phi` (positive semidefinite, `K 1 = 0`).
    pub fn stiffness(&self) -> &CsrMatrix<T> {
        &self.stiffness
    }

    /// `R^m_{phi0}` at every node.
    pub fn weighted_scalar_curvature(&self) -> &Field<T> {
        &self.r_m
    }
    /// `H^m_{phi0}` at every boundary node.
    pub fn weighted_mean_curvature(&self) -> &BoundaryField<T> {
        &self.h_m
    }

    /// Weighted quadrature `int u e^{-phi0} dV`.
    pub fn integrate(&self, u: &[T]) -> T {
        self.mass_phi.iter().zip(u).map(|(&a, &b)| a * b).sum()
    }
    /// Weighted boundary quadrature `int u e^{-phi0} dA` of a boundary field.
    pub fn integrate_boundary(&self, u: &[T]) -> T {
        self.bweight_phi.iter().zip(u).map(|(&a, &b)| a * b).sum()
    }

    /// `Lap_phi u = Lap u - <grad phi, grad u>`: the self-adjoint finite
    /// volume form at non-boundary nodes, the one-sided value at the boundary.
    pub fn weighted_laplacian(&self, u: &[T]) -> Field<T> {
        let ku = self.stiffness.matvec(u);
        let mut out: Vec<T> = ku.iter().zip(&self.mass_phi).map(|(&a, &m)| -a / m).collect();
        let b_idx = self.domain.boundary_index_set();
        if !b_idx.is_empty() {
            let lap = self.domain.laplacian(u);
            let g = self.domain.gradient_inner(&self.phi0, u);
            for &i in b_idx {
                out[i] = lap[i] - g[i];
            }
        }
        Field::new(out)
    }

    /// `L u = -c Lap_phi u + R^m u`.
    pub fn apply_l(&self, u: &[T]) -> Field<T> {
        let lap = self.weighted_laplacian(u);
        Field::new((0..u.len()).map(|i| -self.coef.c * lap[i] + self.r_m[i] * u[i]).collect())
    }

    /// `B u = (c/2) du/dnu + H^m u`.
    pub fn apply_b(&self, u: &[T]) -> BoundaryField<T> {
        let dn = self.domain.normal_derivative(u);
        let half_c = self.coef.c / T::lit(2.0);
        let b = self.domain.boundary_index_set();
        BoundaryField::new((0..dn.len()).map(|s| half_c * dn[s] + self.h_m[s] * u[b[s]]).collect())
    }

    /// `Lbar u = -Lap_phi u - R^m u / (n+m-1)`.
    pub fn apply_lbar(&self, u: &[T]) -> Field<T> {
        let lap = self.weighted_laplacian(u);
        Field::new((0..u.len()).map(|i| -lap[i] - self.r_m[i] * u[i] / self.coef.nm1).collect())
    }

    /// `Bbar u = du/dnu - H^m u / (n+m-1)`.
    pub fn apply_bbar(&self, u: &[T]) -> BoundaryField<T> {
        let dn = self.domain.normal_derivative(u);
        let b = self.domain.boundary_index_set();
        BoundaryField::new((0..dn.len()).map(|s| dn[s] - self.h_m[s] * u[b[s]] / self.coef.nm1).collect())
    }

    /// Symmetric matrix of the quadratic form
    /// `grad_coef |grad u|^2 + r_coef R u^2 (volume) + h_coef H u^2 (boundary)`.
    pub fn energy_matrix(&self, grad_coef: T, r_coef: T, h_coef: T) -> CsrMatrix<T> {
        let nn = self.domain.node_count();
        let mut d: Vec<T> = (0..nn).map(|i| r_coef * self.mass_phi[i] * self.r_m[i]).collect();
        for (s, &i) in self.domain.boundary_index_set().iter().enumerate() {
            d[i] += h_coef * self.bweight_phi[s] * self.h_m[s];
        }
        let ones = vec![grad_coef; nn];
        let unit = vec![T::one(); nn];
        self.stiffness.scaled(&ones, &unit).plus_diagonal(&d)
    }

    /// Matrix of the `(L, B)` energy `c|grad u|^2 + R u^2 + 2 H u^2`.
    pub fn lb_matrix(&self) -> CsrMatrix<T> {
        self.energy_matrix(self.coef.c, T::one(), T::lit(2.0))
    }

    /// Matrix of the `(Lbar, Bbar)` energy.
    pub fn barred_matrix(&self) -> CsrMatrix<T> {
        let f = -T::one() / self.coef.nm1;
        self.energy_matrix(T::one(), f, f)
    }

    /// Finite volume form of system `L w = R w^q`, `B w = H w^qb`:
    /// `F(w) = c K w + M (R w - R w^q) + 2 S (H w - H w^qb)`.
    pub fn yamabe_system(&self, w: &[T]) -> Vec<T> {
        let c = &self.coef;
        let kw = self.stiffness.matvec(w);
        let mut f: Vec<T> =
            (0..w.len()).map(|i| c.c * kw[i] + self.mass_phi[i] * self.r_m[i] * (w[i] - powr(w[i], c.q))).collect();
        for (s, &i) in self.domain.boundary_index_set().iter().enumerate() {
            f[i] += T::lit(2.0) * self.bweight_phi[s] * self.h_m[s] * (w[i] - powr(w[i], c.qb));
        }
        f
    }

    /// Splits a finite volume vector into row-normalized interior values
    /// (divided by `M_i`, zero at boundary nodes) and boundary values
    /// (divided by `2 S_b`).
    pub fn normalize_rows(&self, f: &[T]) -> (Field<T>, BoundaryField<T>) {
        let mut interior: Vec<T> = f.iter().zip(&self.mass_phi).map(|(&a, &m)| a / m).collect();
        let b_idx = self.domain.boundary_index_set();
        let boundary = b_idx.iter().enumerate().map(|(s, &i)| f[i] / (T::lit(2.0) * self.bweight_phi[s])).collect();
        for &i in b_idx {
            interior[i] = T::zero();
        }
        (Field::new(interior), BoundaryField::new(boundary))
    }

    /// Residual of the prescribed curvature system for `w`. Interior rows
    /// approximate `L w - R w^q`, boundary rows `B w - H w^qb`; both share
    /// the finite volume discretization used by the solvers, so solutions
    /// of the discrete system have residual at rounding level.
    pub fn yamabe_residual(&self, w: &ConformalFactor<T>) -> (Field<T>, BoundaryField<T>) {
        self.normalize_rows(&self.yamabe_system(w.field()))
    }

    /// Max norm of both residual parts.
    pub fn yamabe_residual_norm(&self, w: &ConformalFactor<T>) -> T {
        let (a, b) = self.yamabe_residual(w);
        max_abs(&a).max(max_abs(&b))
    }

    /// Curvatures and measure multipliers of `(w^{4/k} g0, phi0 - (2m/k) log w)`.
    pub fn conformal_transform(&self, w: &ConformalFactor<T>) -> ConformalImage<T> {
        let c = &self.coef;
        let w = w.field();
        let lw = self.apply_l(w);
        let bw = self.apply_b(w);
        let r_new = (0..w.len()).map(|i| powr(w[i], -c.q) * lw[i]).collect();
        let b_idx = self.domain.boundary_index_set();
        let h_new = (0..bw.len()).map(|s| powr(w[b_idx[s]], -c.qb) * bw[s]).collect();
        let vol_weight = w.iter().map(|&x| powr(x, c.vol_exp())).collect();
        let area_weight = b_idx.iter().map(|&i| powr(w[i], c.area_exp())).collect();
        ConformalImage {
            r_new: Field::new(r_new),
            h_new: BoundaryField::new(h_new),
            vol_weight: Field::new(vol_weight),
            area_weight: BoundaryField::new(area_weight),
        }
    }
}

/// Weighted curvatures of `(w^{4/k} g0, phi0 - (2m/k) log w)` computed
/// from the metric itself: with `g = e^{2f} g0`, `f = (2/k) log w`, the
/// classical formulas for `R_g`, `H_g`, `Lap_g` and `|grad|_g` are evaluated
/// by finite differences of `f`, without going through `L` or `B`.
pub fn conformal_curvatures_direct<T: Real>(bg: &SmmsBackground<T>, w: &ConformalFactor<T>) -> (Field<T>, BoundaryField<T>) {
    let d = bg.domain();
    let c = &bg.coef;
    let (n, m) = (c.n, c.m);
    let two = T::lit(2.0);
    let f: Vec<T> = w.field().iter().map(|&x| two / c.k * x.ln()).collect();
    let phi: Vec<T> = bg.phi0.iter().zip(&f).map(|(&p, &ff)| p - m * ff).collect();
    let lap_f = d.laplacian(&f);
    let gff = d.gradient_inner(&f, &f);
    let mut r = Vec::with_capacity(f.len());
    let weighted = m != T::zero();
    let (lap_p, gfp, gpp) = if weighted {
        (d.laplacian(&phi), d.gradient_inner(&f, &phi), d.gradient_inner(&phi, &phi))
    } else {
        let z = Field::new(vec![T::zero(); f.len()]);
        (z.clone(), z.clone(), z)
    };
    for i in 0..f.len() {
        let mut v = bg.r_g0[i] - two * (n - T::one()) * lap_f[i] - (n - two) * (n - T::one()) * gff[i];
        if weighted {
            v += two * lap_p[i] + two * (n - two) * gfp[i] - (m + T::one()) / m * gpp[i];
        }
        r.push((-two * f[i]).exp() * v);
    }
    let dnf = d.normal_derivative(&f);
    let dnp = d.normal_derivative(&phi);
    let h = (0..dnf.len())
        .map(|s| {
            let i = d.boundary_index_set()[s];
            let hg = bg.h_g0[s] + (n - T::one()) * dnf[s];
            let dp = if weighted { dnp[s] } else { T::zero() };
            (-f[i]).exp() * (hg - dp)
        })
        .collect();
    (Field::new(r), BoundaryField::new(h))
}

/// Result of a conformal change: new weighted curvatures and the factors
/// relating the new weighted measures to the background ones.
#[derive(Debug, Clone)]
pub struct ConformalImage<T> {
    pub r_new: Field<T>,
    pub h_new: BoundaryField<T>,
    pub vol_weight: Field<T>,
    pub area_weight: BoundaryField<T>,
}
