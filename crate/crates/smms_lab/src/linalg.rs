//! Sparse and banded linear algebra used by the solvers.

use crate::error::{LabError, Result};
use crate::scalar::Real;

/// Square sparse matrix in compressed row form.
#[derive(Debug, Clone)]
pub struct CsrMatrix<T> {
    n: usize,
    row_ptr: Vec<usize>,
    cols: Vec<usize>,
    vals: Vec<T>,
}

impl<T: Real> CsrMatrix<T> {
    /// Builds from `(row, col, value)` entries; duplicates are summed.
    pub fn from_triplets(n: usize, mut entries: Vec<(usize, usize, T)>) -> Self {
        entries.sort_by_key(|a| (a.0, a.1));
        let mut row_ptr = vec![0usize; n + 1];
        let mut cols: Vec<usize> = Vec::with_capacity(entries.len());
        let mut vals: Vec<T> = Vec::with_capacity(entries.len());
        let mut last: Option<(usize, usize)> = None;
        for (r, c, v) in entries {
            if last == Some((r, c)) {
                *vals.last_mut().expect("entry present") += v;
            } else {
                cols.push(c);
                vals.push(v);
                row_ptr[r + 1] += 1;
                last = Some((r, c));
            }
        }
        for r in 0..n {
            row_ptr[r + 1] += row_ptr[r];
        }
        CsrMatrix { n, row_ptr, cols, vals }
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    pub fn row(&self, r: usize) -> impl Iterator<Item = (usize, T)> + '_ {
        (self.row_ptr[r]..self.row_ptr[r + 1]).map(move |k| (self.cols[k], self.vals[k]))
    }

    pub fn matvec(&self, x: &[T]) -> Vec<T> {
        (0..self.n).map(|r| self.row(r).map(|(c, v)| v * x[c]).sum()).collect()
    }

    pub fn diagonal(&self) -> Vec<T> {
        (0..self.n).map(|r| self.row(r).filter(|&(c, _)| c == r).map(|(_, v)| v).sum()).collect()
    }

    /// Largest `|i - j|` over stored entries.
    pub fn bandwidth(&self) -> usize {
        (0..self.n).flat_map(|r| self.row(r).map(move |(c, _)| r.abs_diff(c))).max().unwrap_or(0)
    }

    /// `diag(left) * A * diag(right)`.
    pub fn scaled(&self, left: &[T], right: &[T]) -> Self {
        let mut out = self.clone();
        for r in 0..self.n {
            for k in self.row_ptr[r]..self.row_ptr[r + 1] {
                out.vals[k] = left[r] * self.vals[k] * right[self.cols[k]];
            }
        }
        out
    }

    /// `A + diag(d)`.
    pub fn plus_diagonal(&self, d: &[T]) -> Self {
        let mut entries: Vec<(usize, usize, T)> = Vec::with_capacity(self.vals.len() + self.n);
        for r in 0..self.n {
            entries.extend(self.row(r).map(|(c, v)| (r, c, v)));
            entries.push((r, r, d[r]));
        }
        Self::from_triplets(self.n, entries)
    }

    /// Lower Gershgorin bound `min_i (a_ii - sum_{j != i} |a_ij|)`.
    pub fn gershgorin_lower(&self) -> T {
        (0..self.n)
            .map(|r| {
                let (mut d, mut off) = (T::zero(), T::zero());
                for (c, v) in self.row(r) {
                    if c == r {
                        d += v;
                    } else {
                        off += v.abs();
                    }
                }
                d - off
            })
            .fold(T::infinity(), |a, b| a.min(b))
    }

    /// `max_i sum_j |a_ij| / s_i`.
    pub fn scaled_row_norm(&self, s: &[T]) -> T {
        (0..self.n).map(|r| self.row(r).fold(T::zero(), |a, (_, v)| a + v.abs()) / s[r]).fold(T::zero(), |a, b| a.max(b))
    }

    pub fn quadratic_form(&self, x: &[T]) -> T {
        self.matvec(x).iter().zip(x).map(|(&a, &b)| a * b).sum()
    }
}

/// `L D L^T` factorization of a symmetric banded matrix without pivoting.
/// All pivots positive exactly when the matrix is positive definite
/// (Sylvester), which is how shifts are certified below the spectrum.
#[derive(Debug, Clone)]
pub struct BandLdl<T> {
    n: usize,
    b: usize,
    low: Vec<T>,
    d: Vec<T>,
}

impl<T: Real> BandLdl<T> {
    pub fn factor(a: &CsrMatrix<T>) -> Self {
        let n = a.dim();
        let b = a.bandwidth();
        let w = b + 1;
        let mut low = vec![T::zero(); n * w];
        for r in 0..n {
            for (c, v) in a.row(r) {
                if c <= r {
                    low[r * w + (r - c)] += v;
                }
            }
        }
        let mut d = vec![T::zero(); n];
        for i in 0..n {
            let j0 = i.saturating_sub(b);
            for j in j0..i {
                let k0 = j0.max(j.saturating_sub(b));
                let mut s = low[i * w + (i - j)];
                for k in k0..j {
                    s -= low[i * w + (i - k)] * low[j * w + (j - k)] * d[k];
                }
                low[i * w + (i - j)] = if d[j] != T::zero() { s / d[j] } else { T::nan() };
            }
            let mut s = low[i * w];
            for k in j0..i {
                let l = low[i * w + (i - k)];
                s -= l * l * d[k];
            }
            d[i] = s;
            low[i * w] = T::one();
        }
        BandLdl { n, b, low, d }
    }

    pub fn is_positive_definite(&self) -> bool {
        self.d.iter().all(|&x| x > T::zero() && x.is_finite())
    }

    pub fn negative_pivots(&self) -> usize {
        self.d.iter().filter(|&&x| !(x > T::zero())).count()
    }

    pub fn solve(&self, rhs: &[T]) -> Vec<T> {
        let (n, b, w) = (self.n, self.b, self.b + 1);
        let mut x = rhs.to_vec();
        for i in 0..n {
            let mut s = x[i];
            for k in i.saturating_sub(b)..i {
                s -= self.low[i * w + (i - k)] * x[k];
            }
            x[i] = s;
        }
        for i in 0..n {
            x[i] /= self.d[i];
        }
        for i in (0..n).rev() {
            let mut s = x[i];
            for k in i + 1..(i + b + 1).min(n) {
                s -= self.low[k * w + (k - i)] * x[k];
            }
            x[i] = s;
        }
        x
    }
}

/// Banded LU with partial pivoting for general (possibly indefinite)
/// band matrices. Rows are stored relative to their current position
/// covering columns `[r - kl, r + ku + kl]`.
#[derive(Debug, Clone)]
pub struct BandLu<T> {
    n: usize,
    kl: usize,
    width: usize,
    rows: Vec<Vec<T>>,
    mult: Vec<Vec<T>>,
    piv: Vec<usize>,
}

impl<T: Real> BandLu<T> {
    pub fn factor(a: &CsrMatrix<T>) -> Result<Self> {
        let n = a.dim();
        let kl = a.bandwidth();
        let ku = kl;
        let width = 2 * kl + ku + 1;
        let mut rows = vec![vec![T::zero(); width]; n];
        for (r, row) in rows.iter_mut().enumerate() {
            for (c, v) in a.row(r) {
                row[c + kl - r] += v;
            }
        }
        let mut mult = vec![vec![T::zero(); kl]; n];
        let mut piv = vec![0usize; n];
        let scale = (0..n).flat_map(|r| a.row(r).map(|(_, v)| v.abs())).fold(T::zero(), |m, x| m.max(x));
        for k in 0..n {
            let last = (k + kl).min(n - 1);
            let mut p = k;
            let mut best = rows[k][kl].abs();
            for r in k + 1..=last {
                let v = rows[r][k + kl - r].abs();
                if v > best {
                    best = v;
                    p = r;
                }
            }
            if !(best > scale * T::epsilon() * T::lit(1e-3)) {
                return Err(LabError::SolverFailure(format!("singular band matrix at column {k}")));
            }
            piv[k] = p;
            if p != k {
                let shift = p - k;
                let mut moved_up = vec![T::zero(); width];
                let mut moved_down = vec![T::zero(); width];
                for o in 0..width {
                    if o >= shift {
                        moved_up[o] = rows[p][o - shift];
                    }
                    if o + shift < width {
                        moved_down[o] = rows[k][o + shift];
                    }
                }
                rows[k] = moved_up;
                rows[p] = moved_down;
            }
            let pivot = rows[k][kl];
            let jmax = (k + kl + ku).min(n - 1);
            for r in k + 1..=last {
                let f = rows[r][k + kl - r] / pivot;
                mult[k][r - k - 1] = f;
                rows[r][k + kl - r] = T::zero();
                if f != T::zero() {
                    for j in k + 1..=jmax {
                        let u = rows[k][j + kl - k];
                        rows[r][j + kl - r] -= f * u;
                    }
                }
            }
        }
        Ok(BandLu { n, kl, width, rows, mult, piv })
    }

    pub fn solve(&self, rhs: &[T]) -> Vec<T> {
        let (n, kl) = (self.n, self.kl);
        let mut x = rhs.to_vec();
        for k in 0..n {
            x.swap(k, self.piv[k]);
            let last = (k + kl).min(n - 1);
            for r in k + 1..=last {
                let f = self.mult[k][r - k - 1];
                let xk = x[k];
                x[r] -= f * xk;
            }
        }
        for k in (0..n).rev() {
            let mut s = x[k];
            let jmax = (k + self.width - 1 - kl).min(n - 1);
            for j in k + 1..=jmax {
                s -= self.rows[k][j + kl - k] * x[j];
            }
            x[k] = s / self.rows[k][kl];
        }
        x
    }
}

/// Jacobi-preconditioned conjugate gradients for symmetric positive
/// definite systems. Stops at `rel_tol` relative residual.
pub fn pcg<T: Real>(a: &CsrMatrix<T>, rhs: &[T], x0: Option<&[T]>, rel_tol: T, max_iter: usize) -> Result<Vec<T>> {
    let n = a.dim();
    let dinv: Vec<T> = a.diagonal().iter().map(|&d| T::one() / d).collect();
    let mut x = x0.map_or_else(|| vec![T::zero(); n], |v| v.to_vec());
    let ax = a.matvec(&x);
    let mut r: Vec<T> = rhs.iter().zip(&ax).map(|(&b, &y)| b - y).collect();
    let bnorm = rhs.iter().map(|&v| v * v).sum::<T>().sqrt().max(T::min_positive_value());
    let mut z: Vec<T> = r.iter().zip(&dinv).map(|(&a, &b)| a * b).collect();
    let mut p = z.clone();
    let mut rz: T = r.iter().zip(&z).map(|(&a, &b)| a * b).sum();
    for _ in 0..max_iter {
        let rnorm = r.iter().map(|&v| v * v).sum::<T>().sqrt();
        if rnorm <= rel_tol * bnorm {
            return Ok(x);
        }
        let ap = a.matvec(&p);
        let pap: T = p.iter().zip(&ap).map(|(&a, &b)| a * b).sum();
        if !(pap > T::zero()) {
            return Err(LabError::SolverFailure("conjugate gradients met a non-positive curvature".into()));
        }
        let alpha = rz / pap;
        for i in 0..n {
            x[i] += alpha * p[i];
            r[i] -= alpha * ap[i];
        }
        for i in 0..n {
            z[i] = r[i] * dinv[i];
        }
        let rz_new: T = r.iter().zip(&z).map(|(&a, &b)| a * b).sum();
        let beta = rz_new / rz;
        rz = rz_new;
        for i in 0..n {
            p[i] = z[i] + beta * p[i];
        }
    }
    Err(LabError::SolverFailure(format!("conjugate gradients did not reach {rel_tol} in {max_iter} iterations")))
}

/// Symmetric positive definite solve: banded `LDL^T` when the band is
/// narrow enough, conjugate gradients otherwise.
#[derive(Debug, Clone)]
pub enum SpdSolver<T> {
    Band(BandLdl<T>),
    Iterative(CsrMatrix<T>),
}

const BAND_WORK_LIMIT: usize = 200_000_000;

impl<T: Real> SpdSolver<T> {
    pub fn new(a: &CsrMatrix<T>) -> Result<Self> {
        let b = a.bandwidth();
        if a.dim().saturating_mul(b.saturating_mul(b)) <= BAND_WORK_LIMIT {
            let f = BandLdl::factor(a);
            if !f.is_positive_definite() {
                return Err(LabError::SolverFailure("matrix is not positive definite".into()));
            }
            Ok(SpdSolver::Band(f))
        } else {
            Ok(SpdSolver::Iterative(a.clone()))
        }
    }

    pub fn solve(&self, rhs: &[T], guess: Option<&[T]>) -> Result<Vec<T>> {
        match self {
            SpdSolver::Band(f) => Ok(f.solve(rhs)),
            SpdSolver::Iterative(a) => pcg(a, rhs, guess, T::lit(1e-12), 20 * a.dim() + 100),
        }
    }
}
