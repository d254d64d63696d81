//! Structured model domains and the discrete calculus built on them.
//!
//! Every domain is a tensor grid of one to three axes. An axis is either
//! linear (density 1) or radial (density `|S^d| r^d`). The grid carries a
//! finite volume discretization: node masses are exact dual-cell integrals of
//! the density and edge coefficients are dual-face measures divided by the
//! spacing, so `-K` is a symmetric divergence-form Laplacian and the discrete
//! Green identity `u^T K v = sum_e c_e (u_i - u_j)(v_i - v_j)` holds exactly.

use std::ops::{Deref, DerefMut};

use serde::Serialize;

use crate::error::{LabError, Result};
use crate::scalar::Real;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum DomainKind {
    Interval,
    RadialBall,
    HalfspaceCylinder,
    /// Cartesian box `[-X, X]^2 x [0, T]` in the half-space with `n = 3`.
    HalfspaceBox,
}

/// Samples of a scalar function at every node.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct Field<T> {
    pub values: Vec<T>,
}

/// Samples of a scalar function at the boundary nodes, in boundary order.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct BoundaryField<T> {
    pub values: Vec<T>,
}

macro_rules! vector_newtype {
    ($name:ident) => {
        impl<T> $name<T> {
            pub fn new(values: Vec<T>) -> Self {
                Self { values }
            }
            pub fn into_inner(self) -> Vec<T> {
                self.values
            }
        }
        impl<T> Deref for $name<T> {
            type Target = [T];
            fn deref(&self) -> &[T] {
                &self.values
            }
        }
        impl<T> DerefMut for $name<T> {
            fn deref_mut(&mut self) -> &mut [T] {
                &mut self.values
            }
        }
        impl<T> From<Vec<T>> for $name<T> {
            fn from(values: Vec<T>) -> Self {
                Self { values }
            }
        }
    };
}

vector_newtype!(Field);
vector_newtype!(BoundaryField);

impl<T: Real> Field<T> {
    pub fn constant(domain: &DiscreteDomain<T>, c: T) -> Self {
        Self::new(vec![c; domain.node_count()])
    }

    /// Evaluates `f` at the coordinates of every node.
    pub fn from_fn(domain: &DiscreteDomain<T>, f: impl Fn(&[T]) -> T) -> Self {
        Self::new((0..domain.node_count()).map(|i| f(domain.coord(i))).collect())
    }

    pub fn map(&self, f: impl Fn(T) -> T) -> Self {
        Self::new(self.values.iter().map(|&x| f(x)).collect())
    }
}

impl<T: Real> BoundaryField<T> {
    pub fn constant(domain: &DiscreteDomain<T>, c: T) -> Self {
        Self::new(vec![c; domain.boundary_count()])
    }

    pub fn from_fn(domain: &DiscreteDomain<T>, f: impl Fn(&[T]) -> T) -> Self {
        Self::new(domain.boundary_index_set().iter().map(|&i| f(domain.coord(i))).collect())
    }
}

#[derive(Debug, Clone)]
struct Axis<T> {
    count: usize,
    h: T,
    start: T,
    /// `(d, |S^d|)` when the axis is radial with density `|S^d| r^d`.
    radial: Option<(usize, T)>,
    /// One-dimensional dual-cell measures (density included).
    dual: Vec<T>,
}

impl<T: Real> Axis<T> {
    fn linear(count: usize, start: T, length: T) -> Self {
        let h = length / T::of(count - 1);
        let mut dual = vec![h; count];
        dual[0] = h / T::lit(2.0);
        dual[count - 1] = h / T::lit(2.0);
        Axis { count, h, start, radial: None, dual }
    }

    fn radial(count: usize, length: T, power: usize) -> Self {
        let h = length / T::of(count - 1);
        let sphere = sphere_area::<T>(power);
        let half = h / T::lit(2.0);
        let p1 = T::of(power + 1);
        let dual = (0..count)
            .map(|i| {
                let r = h * T::of(i);
                let a = (r - half).max(T::zero());
                let b = (r + half).min(length);
                sphere / p1 * (b.powi(power as i32 + 1) - a.powi(power as i32 + 1))
            })
            .collect();
        Axis { count, h, start: T::zero(), radial: Some((power, sphere)), dual }
    }

    fn coord(&self, i: usize) -> T {
        self.start + self.h * T::of(i)
    }

    fn density(&self, x: T) -> T {
        match self.radial {
            Some((d, s)) => s * x.powi(d as i32),
            None => T::one(),
        }
    }

    /// Dual-face coefficient of the edge `(i, i + 1)`.
    fn face(&self, i: usize) -> T {
        let mid = self.coord(i) + self.h / T::lit(2.0);
        self.density(mid) / self.h
    }
}

/// Surface area of the unit `d`-sphere in `R^{d+1}`.
pub fn sphere_area<T: Real>(d: usize) -> T {
    let two_pi = T::lit(2.0) * T::PI();
    let mut a = if d.is_multiple_of(2) { T::lit(2.0) } else { two_pi };
    let mut k = if d.is_multiple_of(2) { 0 } else { 1 };
    while k < d {
        k += 2;
        a = a * two_pi / T::of(k - 1);
    }
    a
}

/// An edge of the finite volume graph.
#[derive(Debug, Clone, Copy)]
pub struct Edge<T> {
    pub i: usize,
    pub j: usize,
    pub axis: usize,
    pub coef: T,
}

/// Geometry of one boundary node: the axis carrying the outward normal and
/// the nodes stepping inward from it (the first entry is the node itself).
#[derive(Debug, Clone)]
pub struct BoundaryNode<T> {
    pub node: usize,
    pub normal_axis: usize,
    pub inward: Vec<usize>,
    pub h: T,
}

/// JSON descriptor of a domain.
#[derive(Debug, Clone, Serialize)]
pub struct DomainDescriptor {
    pub kind: DomainKind,
    pub n: usize,
    pub m: f64,
    pub counts: Vec<usize>,
    pub extents: Vec<[f64; 2]>,
}

#[derive(Debug, Clone)]
pub struct DiscreteDomain<T> {
    kind: DomainKind,
    dim_n: usize,
    dim_m: T,
    axes: Vec<Axis<T>>,
    strides: Vec<usize>,
    coords: Vec<T>,
    density: Vec<T>,
    mass: Vec<T>,
    interior: Vec<usize>,
    boundary: Vec<usize>,
    slot: Vec<Option<usize>>,
    boundary_nodes: Vec<BoundaryNode<T>>,
    boundary_weight: Vec<T>,
    edges: Vec<Edge<T>>,
    adjacency: Vec<Vec<(usize, usize)>>,
}

fn check_m<T: Real>(dim_m: T) -> Result<()> {
    if !(dim_m >= T::zero()) || !dim_m.is_finite() {
        return Err(LabError::InvalidDomain(format!("dim_m must be finite and >= 0, got {dim_m}")));
    }
    Ok(())
}

/// Uniform grid on `[0, length]` with boundary `{0, length}`.
pub fn build_interval_domain<T: Real>(node_count: usize, length: T, dim_n: usize, dim_m: T) -> Result<DiscreteDomain<T>> {
    if node_count < 3 {
        return Err(LabError::InvalidDomain(format!("interval needs >= 3 nodes, got {node_count}")));
    }
    if !(length > T::zero()) || !length.is_finite() {
        return Err(LabError::InvalidDomain(format!("interval length must be positive, got {length}")));
    }
    check_m(dim_m)?;
    let axis = Axis::linear(node_count, T::zero(), length);
    let last = node_count - 1;
    let b0 = BoundaryNode { node: 0, normal_axis: 0, inward: inward_chain(0, 1, node_count), h: axis.h };
    let b1 = BoundaryNode { node: last, normal_axis: 0, inward: (0..node_count.min(4)).map(|k| last - k).collect(), h: axis.h };
    DiscreteDomain::assemble(DomainKind::Interval, dim_n, dim_m, vec![axis], vec![b0, b1], |_| T::one())
}

/// Radial reduction of the unit ball `B^n`; the boundary is the node `r = 1`.
pub fn build_radial_ball_domain<T: Real>(node_count: usize, dim_n: usize, dim_m: T) -> Result<DiscreteDomain<T>> {
    if node_count < 4 {
        return Err(LabError::InvalidDomain(format!("radial ball needs >= 4 nodes, got {node_count}")));
    }
    if dim_n < 3 {
        return Err(LabError::InvalidDomain(format!("radial ball needs n >= 3, got {dim_n}")));
    }
    check_m(dim_m)?;
    let axis = Axis::radial(node_count, T::one(), dim_n - 1);
    let last = node_count - 1;
    let sphere = sphere_area::<T>(dim_n - 1);
    let b = BoundaryNode { node: last, normal_axis: 0, inward: (0..4).map(|k| last - k).collect(), h: axis.h };
    DiscreteDomain::assemble(DomainKind::RadialBall, dim_n, dim_m, vec![axis], vec![b], |_| sphere)
}

/// Truncated half-space `[0, r_max] x [0, t_max]` in cylindrical coordinates
/// `r = |x - x_0|`. The trace boundary is `t = 0`; the truncation faces are
/// closed by zero flux.
pub fn build_halfspace_cylinder_domain<T: Real>(
    nr: usize,
    nt: usize,
    r_max: T,
    t_max: T,
    dim_n: usize,
    dim_m: T,
) -> Result<DiscreteDomain<T>> {
    if nr < 4 || nt < 4 {
        return Err(LabError::InvalidDomain(format!("cylinder needs nr, nt >= 4, got ({nr}, {nt})")));
    }
    if !(r_max > T::zero()) || !(t_max > T::zero()) || !r_max.is_finite() || !t_max.is_finite() {
        return Err(LabError::InvalidDomain(format!("cylinder extents must be positive, got ({r_max}, {t_max})")));
    }
    if dim_n < 3 {
        return Err(LabError::InvalidDomain(format!("cylinder needs n >= 3, got {dim_n}")));
    }
    check_m(dim_m)?;
    let ar = Axis::radial(nr, r_max, dim_n - 2);
    let at = Axis::linear(nt, T::zero(), t_max);
    let ht = at.h;
    let boundary =
        (0..nr).map(|i| BoundaryNode { node: i, normal_axis: 1, inward: (0..4).map(|k| i + k * nr).collect(), h: ht }).collect();
    let dual_r = ar.dual.clone();
    DiscreteDomain::assemble(DomainKind::HalfspaceCylinder, dim_n, dim_m, vec![ar, at], boundary, |b| dual_r[b % nr])
}

/// Cartesian half-space box `[-x_half, x_half]^2 x [0, t_max]` (so `n = 3`),
/// trace boundary `t = 0`, zero-flux closure on the truncation faces.
pub fn build_halfspace_box_domain<T: Real>(nx: usize, nt: usize, x_half: T, t_max: T, dim_m: T) -> Result<DiscreteDomain<T>> {
    if nx < 4 || nt < 4 {
        return Err(LabError::InvalidDomain(format!("box needs nx, nt >= 4, got ({nx}, {nt})")));
    }
    if !(x_half > T::zero()) || !(t_max > T::zero()) || !x_half.is_finite() || !t_max.is_finite() {
        return Err(LabError::InvalidDomain(format!("box extents must be positive, got ({x_half}, {t_max})")));
    }
    check_m(dim_m)?;
    let two = T::lit(2.0);
    let a1 = Axis::linear(nx, -x_half, two * x_half);
    let a2 = Axis::linear(nx, -x_half, two * x_half);
    let at = Axis::linear(nt, T::zero(), t_max);
    let ht = at.h;
    let plane = nx * nx;
    let boundary = (0..plane)
        .map(|i| BoundaryNode { node: i, normal_axis: 2, inward: (0..4).map(|k| i + k * plane).collect(), h: ht })
        .collect();
    let (d1, d2) = (a1.dual.clone(), a2.dual.clone());
    DiscreteDomain::assemble(DomainKind::HalfspaceBox, 3, dim_m, vec![a1, a2, at], boundary, |b| d1[b % nx] * d2[b / nx])
}

fn inward_chain(start: usize, step: usize, count: usize) -> Vec<usize> {
    (0..count.min(4)).map(|k| start + k * step).collect()
}

impl<T: Real> DiscreteDomain<T> {
    fn assemble(
        kind: DomainKind,
        dim_n: usize,
        dim_m: T,
        axes: Vec<Axis<T>>,
        boundary_nodes: Vec<BoundaryNode<T>>,
        boundary_weight_of: impl Fn(usize) -> T,
    ) -> Result<Self> {
        let dims = axes.len();
        let mut strides = vec![1usize; dims];
        for a in 1..dims {
            strides[a] = strides[a - 1] * axes[a - 1].count;
        }
        let n_nodes = strides[dims - 1] * axes[dims - 1].count;
        let mut coords = Vec::with_capacity(n_nodes * dims);
        let mut density = Vec::with_capacity(n_nodes);
        let mut mass = Vec::with_capacity(n_nodes);
        for node in 0..n_nodes {
            let mut rho = T::one();
            let mut mu = T::one();
            for (a, ax) in axes.iter().enumerate() {
                let i = (node / strides[a]) % ax.count;
                let x = ax.coord(i);
                coords.push(x);
                rho *= ax.density(x);
                mu *= ax.dual[i];
            }
            density.push(rho);
            mass.push(mu);
        }
        let mut edges = Vec::new();
        for node in 0..n_nodes {
            for (a, ax) in axes.iter().enumerate() {
                let i = (node / strides[a]) % ax.count;
                if i + 1 >= ax.count {
                    continue;
                }
                let mut coef = ax.face(i);
                for (b, bx) in axes.iter().enumerate() {
                    if b != a {
                        coef *= bx.dual[(node / strides[b]) % bx.count];
                    }
                }
                edges.push(Edge { i: node, j: node + strides[a], axis: a, coef });
            }
        }
        let mut adjacency = vec![Vec::new(); n_nodes];
        for (e, edge) in edges.iter().enumerate() {
            adjacency[edge.i].push((edge.j, e));
            adjacency[edge.j].push((edge.i, e));
        }
        let mut slot = vec![None; n_nodes];
        let mut boundary = Vec::with_capacity(boundary_nodes.len());
        let mut boundary_weight = Vec::with_capacity(boundary_nodes.len());
        for (s, bn) in boundary_nodes.iter().enumerate() {
            if slot[bn.node].is_some() {
                return Err(LabError::InvalidDomain(format!("node {} listed twice on the boundary", bn.node)));
            }
            slot[bn.node] = Some(s);
            boundary.push(bn.node);
            boundary_weight.push(boundary_weight_of(bn.node));
        }
        let interior = (0..n_nodes).filter(|&i| slot[i].is_none()).collect();
        Ok(DiscreteDomain {
            kind,
            dim_n,
            dim_m,
            axes,
            strides,
            coords,
            density,
            mass,
            interior,
            boundary,
            slot,
            boundary_nodes,
            boundary_weight,
            edges,
            adjacency,
        })
    }

    pub fn kind(&self) -> DomainKind {
        self.kind
    }
    pub fn dim_n(&self) -> usize {
        self.dim_n
    }
    pub fn dim_m(&self) -> T {
        self.dim_m
    }
    pub fn node_count(&self) -> usize {
        self.mass.len()
    }
    pub fn boundary_count(&self) -> usize {
        self.boundary.len()
    }
    /// Number of grid axes (1, 2 or 3).
    pub fn axis_count(&self) -> usize {
        self.axes.len()
    }
    pub fn axis_len(&self, axis: usize) -> usize {
        self.axes[axis].count
    }
    pub fn spacing(&self, axis: usize) -> T {
        self.axes[axis].h
    }
    /// Representative spacing used in `O(h^2)` bounds (the largest one).
    pub fn h(&self) -> T {
        self.axes.iter().fold(T::zero(), |m, a| m.max(a.h))
    }
    pub fn is_radial_axis(&self, axis: usize) -> bool {
        self.axes[axis].radial.is_some()
    }
    /// Power `d` of the density `|S^d| r^d` on a radial axis.
    pub fn radial_power(&self, axis: usize) -> Option<usize> {
        self.axes[axis].radial.map(|(d, _)| d)
    }
    /// Whether `node` sits on an artificial truncation face of a half-space
    /// domain (any face except the trace boundary `t = 0` and the axis
    /// `r = 0`). Interval and ball domains have none.
    pub fn is_truncation_node(&self, node: usize) -> bool {
        if !matches!(self.kind, DomainKind::HalfspaceBox | DomainKind::HalfspaceCylinder) {
            return false;
        }
        let normal = self.axes.len() - 1;
        (0..self.axes.len()).any(|a| {
            let i = self.local(node, a);
            i + 1 == self.axes[a].count || (i == 0 && a != normal && self.axes[a].radial.is_none())
        })
    }

    pub fn coord(&self, node: usize) -> &[T] {
        let d = self.axes.len();
        &self.coords[node * d..(node + 1) * d]
    }
    /// Pointwise density of the geometric measure.
    pub fn measure_weight(&self) -> &[T] {
        &self.density
    }
    /// Quadrature weight of every node (dual-cell measure).
    pub fn node_mass(&self) -> &[T] {
        &self.mass
    }
    pub fn boundary_weight(&self) -> &[T] {
        &self.boundary_weight
    }
    pub fn interior_index_set(&self) -> &[usize] {
        &self.interior
    }
    pub fn boundary_index_set(&self) -> &[usize] {
        &self.boundary
    }
    pub fn boundary_nodes(&self) -> &[BoundaryNode<T>] {
        &self.boundary_nodes
    }
    /// Position of `node` in boundary order, if it is a boundary node.
    pub fn boundary_slot(&self, node: usize) -> Option<usize> {
        self.slot[node]
    }
    pub fn edges(&self) -> &[Edge<T>] {
        &self.edges
    }
    /// `(neighbour, edge index)` pairs of a node.
    pub fn neighbours(&self, node: usize) -> &[(usize, usize)] {
        &self.adjacency[node]
    }

    pub fn restrict_to_boundary(&self, u: &[T]) -> BoundaryField<T> {
        BoundaryField::new(self.boundary.iter().map(|&i| u[i]).collect())
    }

    pub fn descriptor(&self) -> DomainDescriptor {
        DomainDescriptor {
            kind: self.kind,
            n: self.dim_n,
            m: self.dim_m.as_f64(),
            counts: self.axes.iter().map(|a| a.count).collect(),
            extents: self.axes.iter().map(|a| [a.start.as_f64(), (a.start + a.h * T::of(a.count - 1)).as_f64()]).collect(),
        }
    }

    fn local(&self, node: usize, axis: usize) -> usize {
        (node / self.strides[axis]) % self.axes[axis].count
    }

    /// First derivative along one axis: central inside, mirror (zero) on a
    /// radial axis at `r = 0`, 3-point one-sided at the other ends.
    pub fn axis_derivative(&self, u: &[T], axis: usize) -> Vec<T> {
        let ax = &self.axes[axis];
        let s = self.strides[axis];
        let two_h = T::lit(2.0) * ax.h;
        let (three, four) = (T::lit(3.0), T::lit(4.0));
        (0..self.node_count())
            .map(|k| {
                let i = self.local(k, axis);
                if i > 0 && i + 1 < ax.count {
                    (u[k + s] - u[k - s]) / two_h
                } else if i == 0 {
                    if ax.radial.is_some() {
                        T::zero()
                    } else {
                        (-three * u[k] + four * u[k + s] - u[k + 2 * s]) / two_h
                    }
                } else {
                    (three * u[k] - four * u[k - s] + u[k - 2 * s]) / two_h
                }
            })
            .collect()
    }

    /// Second derivative along one axis: central inside, mirrored at `r = 0`,
    /// 4-point one-sided (3-point on 3-node axes) at the other ends.
    pub fn axis_second_derivative(&self, u: &[T], axis: usize) -> Vec<T> {
        let ax = &self.axes[axis];
        let s = self.strides[axis];
        let h2 = ax.h * ax.h;
        (0..self.node_count())
            .map(|k| {
                let i = self.local(k, axis);
                if i > 0 && i + 1 < ax.count {
                    (u[k + s] - T::lit(2.0) * u[k] + u[k - s]) / h2
                } else if i == 0 && ax.radial.is_some() {
                    T::lit(2.0) * (u[k + s] - u[k]) / h2
                } else {
                    let step = |j: usize| if i == 0 { u[k + j * s] } else { u[k - j * s] };
                    one_sided_second(ax.count, step) / h2
                }
            })
            .collect()
    }

    /// Divergence-form Laplacian. Non-boundary nodes carry the finite volume
    /// value `-(K u)_i / M_i`; boundary nodes carry the one-sided value
    /// (tangential flux part plus a one-sided normal second derivative).
    pub fn laplacian(&self, u: &[T]) -> Field<T> {
        let mut out = vec![T::zero(); self.node_count()];
        for (k, o) in out.iter_mut().enumerate() {
            let normal = self.slot[k].map(|s| self.boundary_nodes[s].normal_axis);
            let mut flux = T::zero();
            for &(j, e) in &self.adjacency[k] {
                let edge = &self.edges[e];
                if Some(edge.axis) != normal {
                    flux += edge.coef * (u[j] - u[k]);
                }
            }
            *o = flux / self.mass[k];
        }
        for bn in &self.boundary_nodes {
            let k = bn.node;
            let h2 = bn.h * bn.h;
            let v = |j: usize| u[bn.inward[j]];
            let mut normal = one_sided_second(bn.inward.len(), v) / h2;
            if let Some((d, _)) = self.axes[bn.normal_axis].radial {
                let r = self.coord(k)[bn.normal_axis];
                normal += T::of(d) / r * self.one_sided_first(bn, u);
            }
            out[k] += normal;
        }
        Field::new(out)
    }

    fn one_sided_first(&self, bn: &BoundaryNode<T>, u: &[T]) -> T {
        let (a, b, c) = (u[bn.inward[0]], u[bn.inward[1]], u[bn.inward[2]]);
        (T::lit(3.0) * a - T::lit(4.0) * b + c) / (T::lit(2.0) * bn.h)
    }

    /// Pointwise `<grad a, grad b>` from per-axis differences.
    pub fn gradient_inner(&self, a: &[T], b: &[T]) -> Field<T> {
        let mut out = vec![T::zero(); self.node_count()];
        for axis in 0..self.axes.len() {
            let da = self.axis_derivative(a, axis);
            let db = if std::ptr::eq(a, b) { da.clone() } else { self.axis_derivative(b, axis) };
            for k in 0..out.len() {
                out[k] += da[k] * db[k];
            }
        }
        Field::new(out)
    }

    /// Outward normal derivative by the 3-point one-sided difference.
    pub fn normal_derivative(&self, u: &[T]) -> BoundaryField<T> {
        BoundaryField::new(self.boundary_nodes.iter().map(|bn| self.one_sided_first(bn, u)).collect())
    }

    /// `sum_i M_i u_i w_i`; `extra_weight = None` means weight 1.
    pub fn integrate_volume(&self, u: &[T], extra_weight: Option<&[T]>) -> T {
        match extra_weight {
            Some(w) => self.mass.iter().zip(u).zip(w).map(|((&m, &x), &y)| m * x * y).sum(),
            None => self.mass.iter().zip(u).map(|(&m, &x)| m * x).sum(),
        }
    }

    /// `sum_b S_b u_b w_b` over boundary nodes.
    pub fn integrate_boundary(&self, u: &[T], extra_weight: Option<&[T]>) -> T {
        match extra_weight {
            Some(w) => self.boundary_weight.iter().zip(u).zip(w).map(|((&s, &x), &y)| s * x * y).sum(),
            None => self.boundary_weight.iter().zip(u).map(|(&s, &x)| s * x).sum(),
        }
    }

    /// Dirichlet form `sum_e c_e g_e (u_i - u_j)(v_i - v_j)` with optional
    /// per-edge factors `g_e`.
    pub fn dirichlet_form(&self, u: &[T], v: &[T], edge_factor: Option<&[T]>) -> T {
        self.edges
            .iter()
            .enumerate()
            .map(|(e, ed)| {
                let g = edge_factor.map_or(T::one(), |f| f[e]);
                ed.coef * g * (u[ed.i] - u[ed.j]) * (v[ed.i] - v[ed.j])
            })
            .sum()
    }

    /// Distance to the trace boundary and the tangential offset from the
    /// chart origin, used to place boundary-concentrated trial functions.
    pub fn boundary_chart(&self, node: usize) -> (T, T) {
        let x = self.coord(node);
        match self.kind {
            DomainKind::Interval => {
                let len = self.axes[0].h * T::of(self.axes[0].count - 1);
                (x[0].min(len - x[0]), T::zero())
            }
            DomainKind::RadialBall => (T::one() - x[0], T::zero()),
            DomainKind::HalfspaceCylinder => (x[1], x[0]),
            DomainKind::HalfspaceBox => (x[2], (x[0] * x[0] + x[1] * x[1]).sqrt()),
        }
    }
}

/// One-sided second difference from samples `u(0), u(h), ...` stepping inward.
fn one_sided_second<T: Real>(available: usize, u: impl Fn(usize) -> T) -> T {
    if available >= 4 {
        T::lit(2.0) * u(0) - T::lit(5.0) * u(1) + T::lit(4.0) * u(2) - u(3)
    } else {
        u(0) - T::lit(2.0) * u(1) + u(2)
    }
}
