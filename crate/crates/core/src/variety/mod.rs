//! Geometry backends: a polarized curve with a fixed basis of sections,
//! a quadrature rule, and section values with two holomorphic derivatives.
//!
//! Every node lives in a chart with a holomorphic coordinate `t`; the node
//! weight is the `dx dy` measure of that coordinate (already multiplied by any
//! partition-of-unity factor) and `z`, `z'`, `z''` are the reference sections
//! written in the chart trivialization.

pub mod plane_cubic;
pub mod projective_line;
pub mod quadrature;

use crate::hermitian::GramMetric;
use crate::reduce::{tree_dot, tree_sum_by};
use crate::{Error, Result, C64};
use serde::{Deserialize, Serialize};
use std::f64::consts::PI;

pub use plane_cubic::{CubicForm, FERMAT};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum GeometryKind {
    ProjectiveLine,
    PlaneCubic,
}

impl GeometryKind {
    /// Degree of the curve in its polarization.
    pub fn degree(self) -> usize {
        match self {
            GeometryKind::ProjectiveLine => 1,
            GeometryKind::PlaneCubic => 3,
        }
    }

    pub fn euler_characteristic(self) -> i32 {
        match self {
            GeometryKind::ProjectiveLine => 2,
            GeometryKind::PlaneCubic => 0,
        }
    }
}

/// Description of `(X, L^k)` and its quadrature.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GeometrySpec {
    pub kind: GeometryKind,
    pub k: usize,
    /// Coefficients of the cubic form in the order
    /// `x³, x²y, x²z, xy², xyz, xz², y³, y²z, yz², z³`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub cubic_coefficients: Option<Vec<C64>>,
    /// `[radial, angular]` node counts.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub quadrature_resolution: Option<[usize; 2]>,
}

impl GeometrySpec {
    pub fn projective_line(k: usize) -> Self {
        GeometrySpec { kind: GeometryKind::ProjectiveLine, k, cubic_coefficients: None, quadrature_resolution: None }
    }

    pub fn plane_cubic(k: usize, coefficients: &[C64]) -> Self {
        GeometrySpec {
            kind: GeometryKind::PlaneCubic,
            k,
            cubic_coefficients: Some(coefficients.to_vec()),
            quadrature_resolution: None,
        }
    }

    pub fn fermat_cubic(k: usize) -> Self {
        Self::plane_cubic(k, &FERMAT.map(|c| C64::new(c, 0.0)))
    }

    pub fn with_resolution(mut self, radial: usize, angular: usize) -> Self {
        self.quadrature_resolution = Some([radial, angular]);
        self
    }

    /// Dimension of the section space.
    pub fn section_dim(&self) -> usize {
        match self.kind {
            GeometryKind::ProjectiveLine => self.k + 1,
            GeometryKind::PlaneCubic => 3 * self.k,
        }
    }

    /// `2πk · deg`.
    pub fn volume(&self) -> f64 {
        2.0 * PI * (self.k * self.kind.degree()) as f64
    }

    /// Resolution actually used: the explicit one or the default.
    pub fn resolution(&self) -> [usize; 2] {
        self.quadrature_resolution.unwrap_or(match self.kind {
            GeometryKind::ProjectiveLine => projective_line::default_resolution(self.k),
            GeometryKind::PlaneCubic => plane_cubic::default_resolution(self.k),
        })
    }

    /// Checks everything that can be checked without building the grid.
    pub fn validate(&self) -> Result<()> {
        if self.k == 0 {
            return Err(Error::InvalidGeometry("k must be at least 1".into()));
        }
        let [radial, angular] = self.resolution();
        if angular < 4 * self.k + 4 {
            return Err(Error::Resolution(format!("angular_nodes = {angular} < 4k+4 = {}", 4 * self.k + 4)));
        }
        if radial < self.k / 2 + 1 {
            return Err(Error::Resolution(format!("radial_nodes = {radial} < k/2+1 = {}", self.k / 2 + 1)));
        }
        match self.kind {
            GeometryKind::ProjectiveLine => {
                if self.cubic_coefficients.is_some() {
                    return Err(Error::InvalidGeometry("cubic_coefficients given for projective_line".into()));
                }
            }
            GeometryKind::PlaneCubic => {
                let c = self
                    .cubic_coefficients
                    .as_ref()
                    .ok_or_else(|| Error::InvalidGeometry("plane_cubic requires cubic_coefficients".into()))?;
                CubicForm::new(c)?;
            }
        }
        Ok(())
    }
}

/// Borrowed view of one quadrature node.
#[derive(Debug, Clone, Copy)]
pub struct NodeRef<'a> {
    pub chart: u8,
    pub t: C64,
    pub weight: f64,
    pub z: &'a [C64],
    pub z1: &'a [C64],
    pub z2: &'a [C64],
}

/// Quadrature nodes carrying section values and derivatives.
#[derive(Debug, Clone)]
pub struct QuadratureGrid {
    spec: GeometrySpec,
    dim: usize,
    volume: f64,
    charts: Vec<u8>,
    coords: Vec<C64>,
    weights: Vec<f64>,
    z: Vec<C64>,
    z1: Vec<C64>,
    z2: Vec<C64>,
}

/// Accumulates nodes in the flat layout used by [`QuadratureGrid`].
pub(crate) struct GridBuilder {
    dim: usize,
    charts: Vec<u8>,
    coords: Vec<C64>,
    weights: Vec<f64>,
    z: Vec<C64>,
    z1: Vec<C64>,
    z2: Vec<C64>,
}

impl GridBuilder {
    pub(crate) fn new(dim: usize, capacity: usize) -> Self {
        GridBuilder {
            dim,
            charts: Vec::with_capacity(capacity),
            coords: Vec::with_capacity(capacity),
            weights: Vec::with_capacity(capacity),
            z: Vec::with_capacity(capacity * dim),
            z1: Vec::with_capacity(capacity * dim),
            z2: Vec::with_capacity(capacity * dim),
        }
    }

    pub(crate) fn push(&mut self, chart: u8, t: C64, weight: f64, z: &[C64], z1: &[C64], z2: &[C64]) {
        debug_assert!(z.len() == self.dim && z1.len() == self.dim && z2.len() == self.dim);
        self.charts.push(chart);
        self.coords.push(t);
        self.weights.push(weight);
        self.z.extend_from_slice(z);
        self.z1.extend_from_slice(z1);
        self.z2.extend_from_slice(z2);
    }

    pub(crate) fn append(&mut self, other: GridBuilder) {
        self.charts.extend(other.charts);
        self.coords.extend(other.coords);
        self.weights.extend(other.weights);
        self.z.extend(other.z);
        self.z1.extend(other.z1);
        self.z2.extend(other.z2);
    }

    pub(crate) fn finish(self, spec: GeometrySpec) -> QuadratureGrid {
        QuadratureGrid {
            volume: spec.volume(),
            dim: self.dim,
            spec,
            charts: self.charts,
            coords: self.coords,
            weights: self.weights,
            z: self.z,
            z1: self.z1,
            z2: self.z2,
        }
    }
}

impl QuadratureGrid {
    pub fn spec(&self) -> &GeometrySpec {
        &self.spec
    }

    pub fn kind(&self) -> GeometryKind {
        self.spec.kind
    }

    pub fn k(&self) -> usize {
        self.spec.k
    }

    /// Section-space dimension `d`.
    pub fn dim(&self) -> usize {
        self.dim
    }

    /// Class volume `V`.
    pub fn volume(&self) -> f64 {
        self.volume
    }

    pub fn total_nodes(&self) -> usize {
        self.weights.len()
    }

    /// `4πχ / V`, the average scalar curvature.
    pub fn s_hat(&self) -> f64 {
        4.0 * PI * self.spec.kind.euler_characteristic() as f64 / self.volume
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn node(&self, i: usize) -> NodeRef<'_> {
        let r = i * self.dim..(i + 1) * self.dim;
        NodeRef {
            chart: self.charts[i],
            t: self.coords[i],
            weight: self.weights[i],
            z: &self.z[r.clone()],
            z1: &self.z1[r.clone()],
            z2: &self.z2[r],
        }
    }

    /// Section values `(z, z', z'')` at an arbitrary chart point, where
    /// the geometry admits global chart formulas.
    pub fn sections_at(&self, chart: u8, t: C64) -> Result<(Vec<C64>, Vec<C64>, Vec<C64>)> {
        match self.spec.kind {
            GeometryKind::ProjectiveLine => Ok(projective_line::sections(self.spec.k, chart, t)),
            GeometryKind::PlaneCubic => {
                Err(Error::Unsupported("pointwise section evaluation off the grid for plane_cubic".into()))
            }
        }
    }

    /// `Σ w_i f(i)` with the deterministic tree.
    pub fn integrate_by<F: Fn(usize) -> f64 + Sync>(&self, f: F) -> f64 {
        tree_sum_by(self.total_nodes(), |i| self.weights[i] * f(i))
    }

    /// Self-test of the rule against known integrals.
    pub fn self_test(&self) -> Result<GridSelfTest> {
        let volume_rel_err = crate::metrics::fs_metric(&GramMetric::identity(self.dim), self)?.volume_error();
        let beta_max_rel_err = match self.spec.kind {
            GeometryKind::ProjectiveLine => Some(projective_line::beta_residual(self)),
            GeometryKind::PlaneCubic => None,
        };
        let [radial, angular] = self.spec.resolution();
        let coarse = build_grid(&self.spec.clone().with_resolution((radial / 2).max(1), (angular / 2).max(1)))
            .ok()
            .and_then(|g| crate::metrics::fs_metric(&GramMetric::identity(g.dim), &g).ok())
            .map(|m| m.volume_error());
        Ok(GridSelfTest {
            total_nodes: self.total_nodes(),
            resolution: [radial, angular],
            volume_rel_err,
            beta_max_rel_err,
            half_resolution_volume_rel_err: coarse,
        })
    }
}

/// Results of [`QuadratureGrid::self_test`].
#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct GridSelfTest {
    pub total_nodes: usize,
    pub resolution: [usize; 2],
    /// `|∫dμ - V| / V` for the reference Fubini–Study metric.
    pub volume_rel_err: f64,
    /// Worst relative error over the Beta integrals, projective line only.
    pub beta_max_rel_err: Option<f64>,
    /// The volume error of the rule with half the nodes in each direction.
    pub half_resolution_volume_rel_err: Option<f64>,
}

fn build_grid(spec: &GeometrySpec) -> Result<QuadratureGrid> {
    spec.validate()?;
    match spec.kind {
        GeometryKind::ProjectiveLine => Ok(projective_line::build(spec)),
        GeometryKind::PlaneCubic => plane_cubic::build(spec),
    }
}

/// Builds the grid and the reference metric (the identity Gram matrix).
pub fn build_geometry(spec: &GeometrySpec) -> Result<(QuadratureGrid, GramMetric)> {
    let grid = build_grid(spec)?;
    let d = grid.dim();
    Ok((grid, GramMetric::identity(d)))
}

/// `Σ w_i v_i` over the grid.
pub fn integrate(grid: &QuadratureGrid, values: &[f64]) -> Result<f64> {
    if values.len() != grid.total_nodes() {
        return Err(Error::DimensionMismatch { expected: grid.total_nodes(), got: values.len() });
    }
    Ok(tree_dot(grid.weights(), values))
}
