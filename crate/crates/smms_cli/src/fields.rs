//! Turning validated descriptors into domains, fields and backgrounds.

use std::path::{Path, PathBuf};
use std::result::Result;
use std::sync::Arc;

use smms_lab::*;

use crate::config::{DomainSpec, FieldRef, SmmsSpec};
use crate::error::{CliError, Context};

/// Resolves relative file references against the configuration directory
/// and remembers every file it read, for the manifest.
pub struct Resolver {
    base: PathBuf,
    pub inputs: Vec<PathBuf>,
}

impl Resolver {
    pub fn new(base: impl Into<PathBuf>) -> Self {
        Resolver { base: base.into(), inputs: Vec::new() }
    }

    fn resolve(&self, p: &Path) -> PathBuf {
        if p.is_absolute() {
            p.to_path_buf()
        } else {
            self.base.join(p)
        }
    }

    fn values_at(&mut self, r: &FieldRef, points: &[&[f64]], name: &str) -> Result<Vec<f64>, CliError> {
        let n = points.len();
        match r {
            FieldRef::Constant(c) => Ok(vec![*c; n]),
            FieldRef::Values(v) => {
                if v.len() != n {
                    return Err(CliError::Input(format!("{name}: expected {n} values, got {}", v.len())));
                }
                Ok(v.clone())
            }
            FieldRef::Polynomial(terms) => {
                let axes = points.first().map_or(0, |p| p.len());
                if let Some(t) = terms.iter().find(|t| t.1.len() != axes) {
                    return Err(CliError::Input(format!(
                        "{name}: polynomial term has {} exponents but the domain has {axes} axes",
                        t.1.len()
                    )));
                }
                Ok(points
                    .iter()
                    .map(|x| {
                        terms.iter().map(|(c, e)| c * e.iter().zip(*x).map(|(&k, &xi)| xi.powi(k as i32)).product::<f64>()).sum()
                    })
                    .collect())
            }
            FieldRef::File { path, column } => {
                let full = self.resolve(path);
                let v = read_column(&full, column.as_deref(), name)?;
                if !self.inputs.contains(&full) {
                    self.inputs.push(full);
                }
                if v.len() != n {
                    return Err(CliError::Input(format!("{name}: {} has {} rows, expected {n}", path.display(), v.len())));
                }
                Ok(v)
            }
        }
    }

    pub fn node_field(&mut self, r: &FieldRef, d: &Domain, name: &str) -> Result<NodeField, CliError> {
        let pts: Vec<&[f64]> = (0..d.node_count()).map(|i| d.coord(i)).collect();
        Ok(Field::new(self.values_at(r, &pts, name)?))
    }

    pub fn boundary_field(&mut self, r: &FieldRef, d: &Domain, name: &str) -> Result<TraceField, CliError> {
        let pts: Vec<&[f64]> = d.boundary_index_set().iter().map(|&i| d.coord(i)).collect();
        Ok(BoundaryField::new(self.values_at(r, &pts, name)?))
    }

    pub fn background(&mut self, spec: &SmmsSpec) -> Result<Arc<Background>, CliError> {
        let d = Arc::new(build_domain(spec)?);
        let phi0 = self.node_field(&spec.phi0, &d, "phi0")?;
        let r = self.node_field(&spec.r_g0, &d, "R_g0")?;
        let h = self.boundary_field(&spec.h_g0, &d, "H_g0")?;
        Ok(Arc::new(Background::new(d, phi0, r, h).context("building the background")?))
    }
}

pub fn build_domain(spec: &SmmsSpec) -> Result<Domain, CliError> {
    let (n, m) = (spec.n, spec.m);
    let d = match spec.domain {
        DomainSpec::Interval { nodes, length } => build_interval_domain(nodes, length, n, m),
        DomainSpec::RadialBall { nodes } => build_radial_ball_domain(nodes, n, m),
        DomainSpec::HalfspaceCylinder { nr, nt, r_max, t_max } => build_halfspace_cylinder_domain(nr, nt, r_max, t_max, n, m),
        DomainSpec::HalfspaceBox { nx, nt, x_half, t_max } => build_halfspace_box_domain(nx, nt, x_half, t_max, m),
    };
    d.context("building the domain")
}

fn read_column(path: &Path, column: Option<&str>, name: &str) -> Result<Vec<f64>, CliError> {
    let mut rd = csv::Reader::from_path(path).map_err(|e| csv_error(path, e))?;
    let headers = rd.headers().map_err(|e| csv_error(path, e))?.clone();
    let idx = match column {
        Some(c) => headers
            .iter()
            .position(|h| h == c)
            .ok_or_else(|| CliError::Input(format!("{name}: {} has no column `{c}`", path.display())))?,
        None => match headers.iter().position(|h| h == "value") {
            Some(i) => i,
            None if !headers.is_empty() => headers.len() - 1,
            None => return Err(CliError::Input(format!("{name}: {} has no columns", path.display()))),
        },
    };
    let mut out = Vec::new();
    for (row, rec) in rd.records().enumerate() {
        let rec = rec.map_err(|e| csv_error(path, e))?;
        let cell = rec.get(idx).unwrap_or("");
        let v: f64 = cell
            .trim()
            .parse()
            .map_err(|_| CliError::Input(format!("{name}: {} row {} has non-numeric `{cell}`", path.display(), row + 1)))?;
        out.push(v);
    }
    Ok(out)
}

fn csv_error(path: &Path, e: csv::Error) -> CliError {
    match e.into_kind() {
        csv::ErrorKind::Io(io) => CliError::io(path, io),
        other => CliError::Input(format!("{}: malformed CSV ({other:?})", path.display())),
    }
}

/// Column names of the node coordinates.
pub fn axis_names(d: &Domain) -> &'static [&'static str] {
    match d.kind() {
        DomainKind::Interval => &["x"],
        DomainKind::RadialBall => &["r"],
        DomainKind::HalfspaceCylinder => &["r", "t"],
        DomainKind::HalfspaceBox => &["x1", "x2", "t"],
    }
}
