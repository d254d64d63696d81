//! Numerical laboratory for conformal deformations of smooth metric measure
//! spaces with boundary on one- to three-dimensional model domains.
//!
//! Everything is generic over the scalar type ([`Real`], implemented for
//! `f32` and `f64`); the aliases at the bottom fix `f64`.

// NaN must fail the positivity guards, so `!(x > 0)` is intended.
#![allow(clippy::neg_cmp_op_on_partial_ord, clippy::needless_range_loop)]

pub mod error;
pub mod flow;
pub mod grid;
pub mod linalg;
pub mod monotone;
pub mod scalar;
pub mod smms;
pub mod spectral;
pub mod variational;

pub use error::{LabError, Result};
pub use grid::{
    build_halfspace_box_domain, build_halfspace_cylinder_domain, build_interval_domain, build_radial_ball_domain, BoundaryField,
    DiscreteDomain, DomainKind, Field,
};
pub use scalar::Real;
pub use smms::{Coefficients, ConformalFactor, ConformalImage, SmmsBackground};

/// Library version, recorded in run manifests.
pub const VERSION: &str = env!("CARGO_PKG_VERSION");

pub type Domain = grid::DiscreteDomain<f64>;
pub type Background = smms::SmmsBackground<f64>;
pub type Factor = smms::ConformalFactor<f64>;
pub type NodeField = grid::Field<f64>;
pub type TraceField = grid::BoundaryField<f64>;
pub type Matrix = linalg::CsrMatrix<f64>;
pub type Eigenpair = spectral::SpectralResult<f64>;
pub type State = flow::FlowState<f64>;
pub type Trace = flow::FlowTrace<f64>;
