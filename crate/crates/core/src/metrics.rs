//! Algebraic fiber metrics `e^c FS(H)` and their curvature.
//!
//! In a chart the metric weight is `e^c / K` with `K = z^T H^{-1} z̄`. All
//! geometric quantities follow from the sesquilinear jets
//! `K, ∂K, ∂∂̄K, …` of the kernel, which only need `z, z', z''`.

use crate::hermitian::GramMetric;
use crate::reduce::tree_sum_by;
use crate::variety::QuadratureGrid;
use crate::{CMat, Error, Result, C64};
use rayon::prelude::*;

/// `Σ_ij x_i P_ij conj(y_j)`, with `py = P conj(y)` precomputed.
#[inline]
fn dot(x: &[C64], py: &[C64]) -> C64 {
    x.iter().zip(py).map(|(a, b)| a * b).sum()
}

/// `P conj(y)`.
#[inline]
fn apply_conj(p: &CMat, y: &[C64], out: &mut [C64]) {
    let d = y.len();
    for i in 0..d {
        let mut acc = C64::new(0.0, 0.0);
        for j in 0..d {
            acc += p[(i, j)] * y[j].conj();
        }
        out[i] = acc;
    }
}

/// Kernel jets at a node. With `(x, y) = x^T P ȳ`:
/// `k = (z,z)`, `a = (z',z')`, `b = (z',z) = ∂K`, `c = (z'',z')`,
/// `e = (z'',z)`, `f = (z'',z'')`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct KernelJet {
    pub k: f64,
    pub a: f64,
    pub b: C64,
    pub c: C64,
    pub e: C64,
    pub f: f64,
}

/// A positive density and its first two derivatives in the chart:
/// `rho`, `∂rho`, `∂∂̄rho`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DensityJet {
    pub rho: f64,
    pub d: C64,
    pub dd: f64,
}

impl DensityJet {
    /// `(1-s) self + s other`.
    pub fn lerp(&self, other: &DensityJet, s: f64) -> DensityJet {
        DensityJet {
            rho: (1.0 - s) * self.rho + s * other.rho,
            d: self.d * (1.0 - s) + other.d * s,
            dd: (1.0 - s) * self.dd + s * other.dd,
        }
    }

    /// Scalar curvature `-(4/ρ) ∂∂̄ log ρ` of the metric with this area density.
    pub fn scalar_curvature(&self) -> f64 {
        let r = self.rho;
        -4.0 * (r * self.dd - self.d.norm_sqr()) / (r * r * r)
    }
}

impl KernelJet {
    fn from_node(p: &CMat, z: &[C64], z1: &[C64], z2: &[C64], buf: &mut [C64]) -> KernelJet {
        let d = z.len();
        let (pz, rest) = buf.split_at_mut(d);
        let (pz1, pz2) = rest.split_at_mut(d);
        apply_conj(p, z, pz);
        apply_conj(p, z1, pz1);
        apply_conj(p, z2, pz2);
        KernelJet {
            k: dot(z, pz).re,
            a: dot(z1, pz1).re,
            b: dot(z1, pz),
            c: dot(z2, pz1),
            e: dot(z2, pz),
            f: dot(z2, pz2).re,
        }
    }

    /// Area density `2 ∂∂̄ log K` and its derivatives.
    pub fn density(&self) -> DensityJet {
        let (k, a, b, c, e, f) = (self.k, self.a, self.b, self.c, self.e, self.f);
        let dm = a * k - b.norm_sqr();
        let ddm = c * k - e * b.conj();
        let dddm = f * k - e.norm_sqr();
        let k2 = k * k;
        let k3 = k2 * k;
        DensityJet {
            rho: 2.0 * dm / k2,
            d: (ddm / k2 - b * (2.0 * dm / k3)) * 2.0,
            dd: 2.0
                * (dddm / k2 - 4.0 * (ddm * b.conj()).re / k3 - 2.0 * dm * a / k3 + 6.0 * dm * b.norm_sqr() / (k3 * k)),
        }
    }
}

/// The fiber metric `e^c FS(H)` sampled on a grid.
#[derive(Debug, Clone)]
pub struct AlgebraicMetric {
    h: GramMetric,
    p: CMat,
    log_scale: f64,
    volume: f64,
    jets: Vec<KernelJet>,
    density: Vec<DensityJet>,
    mass: f64,
}

impl AlgebraicMetric {
    pub fn new(h: &GramMetric, log_scale: f64, grid: &QuadratureGrid) -> Result<Self> {
        if h.dim() != grid.dim() {
            return Err(Error::DimensionMismatch { expected: grid.dim(), got: h.dim() });
        }
        let p = h.inverse();
        let d = grid.dim();
        let jets: Vec<KernelJet> = (0..grid.total_nodes())
            .into_par_iter()
            .map_init(
                || vec![C64::new(0.0, 0.0); 3 * d],
                |buf, i| {
                    let n = grid.node(i);
                    KernelJet::from_node(&p, n.z, n.z1, n.z2, buf)
                },
            )
            .collect();
        if let Some((node, j)) = jets.iter().enumerate().find(|(_, j)| !(j.k > 1e-300)) {
            return Err(Error::BaseLocus { node, value: j.k });
        }
        let density: Vec<DensityJet> = jets.par_iter().map(KernelJet::density).collect();
        let mass = tree_sum_by(density.len(), |i| grid.weights()[i] * density[i].rho);
        Ok(AlgebraicMetric { h: h.clone(), p, log_scale, volume: grid.volume(), jets, density, mass })
    }

    pub fn gram(&self) -> &GramMetric {
        &self.h
    }

    /// `H^{-1}`.
    pub fn inverse_gram(&self) -> &CMat {
        &self.p
    }

    pub fn log_scale(&self) -> f64 {
        self.log_scale
    }

    pub fn total_nodes(&self) -> usize {
        self.jets.len()
    }

    pub fn jet(&self, i: usize) -> &KernelJet {
        &self.jets[i]
    }

    pub fn density_jet(&self, i: usize) -> &DensityJet {
        &self.density[i]
    }

    pub fn density_jets(&self) -> &[DensityJet] {
        &self.density
    }

    /// `K` at node `i`.
    pub fn kernel(&self, i: usize) -> f64 {
        self.jets[i].k
    }

    /// Metric weight `e^c / K` relative to the chart trivialization.
    pub fn weight(&self, i: usize) -> f64 {
        self.log_scale.exp() / self.jets[i].k
    }

    /// Area density of `dμ` against the chart `dx dy`.
    pub fn rho_vol(&self, i: usize) -> f64 {
        self.density[i].rho
    }

    /// `∫ dμ` as computed by the grid.
    pub fn mass(&self) -> f64 {
        self.mass
    }

    /// `|∫dμ - V| / V`.
    pub fn volume_error(&self) -> f64 {
        (self.mass / self.volume - 1.0).abs()
    }

    /// `e^alpha` times this metric.
    pub fn scaled(&self, alpha: f64) -> Self {
        let mut m = self.clone();
        m.log_scale += alpha;
        m
    }

    pub(crate) fn check(&self, grid: &QuadratureGrid) -> Result<()> {
        if grid.total_nodes() != self.total_nodes() || grid.dim() != self.h.dim() {
            return Err(Error::DimensionMismatch { expected: grid.total_nodes(), got: self.total_nodes() });
        }
        Ok(())
    }

    /// `∫ f dμ`.
    pub fn integrate<F: Fn(usize) -> f64 + Sync>(&self, grid: &QuadratureGrid, f: F) -> f64 {
        let w = grid.weights();
        tree_sum_by(self.total_nodes(), |i| w[i] * self.density[i].rho * f(i))
    }

    /// Potential `φ` with `self = e^φ reference`, node-wise.
    pub fn potential(&self, reference: &AlgebraicMetric) -> Result<Vec<f64>> {
        if reference.total_nodes() != self.total_nodes() {
            return Err(Error::DimensionMismatch { expected: reference.total_nodes(), got: self.total_nodes() });
        }
        let dc = self.log_scale - reference.log_scale;
        Ok(self.jets.iter().zip(&reference.jets).map(|(a, r)| dc + (r.k / a.k).ln()).collect())
    }
}

/// `FS(H)`: the metric in which an `H`-orthonormal basis has `Σ|s_α|² = 1`.
pub fn fs_metric(h: &GramMetric, grid: &QuadratureGrid) -> Result<AlgebraicMetric> {
    AlgebraicMetric::new(h, 0.0, grid)
}

/// A real function on the grid with its chart derivatives `∂f` and `∂∂̄f`.
#[derive(Debug, Clone, PartialEq)]
pub struct FieldJets {
    pub f: Vec<f64>,
    pub d: Vec<C64>,
    pub dd: Vec<f64>,
}

impl FieldJets {
    pub fn constant(n: usize, c: f64) -> Self {
        FieldJets { f: vec![c; n], d: vec![C64::new(0.0, 0.0); n], dd: vec![0.0; n] }
    }

    /// `f = (z^T Q z̄) / K` for Hermitian `Q`, with `K` the kernel of `m`.
    pub fn hermitian_ratio(m: &AlgebraicMetric, grid: &QuadratureGrid, q: &CMat) -> Result<Self> {
        m.check(grid)?;
        if q.nrows() != grid.dim() || q.ncols() != grid.dim() {
            return Err(Error::DimensionMismatch { expected: grid.dim(), got: q.nrows() });
        }
        let d = grid.dim();
        let vals: Vec<(f64, C64, f64)> = (0..grid.total_nodes())
            .into_par_iter()
            .map_init(
                || vec![C64::new(0.0, 0.0); 2 * d],
                |buf, i| {
                    let node = grid.node(i);
                    let (qz, qz1) = buf.split_at_mut(d);
                    apply_conj(q, node.z, qz);
                    apply_conj(q, node.z1, qz1);
                    let n = dot(node.z, qz).re;
                    let dn = dot(node.z1, qz);
                    let ddn = dot(node.z1, qz1).re;
                    let j = &m.jets[i];
                    let (k, b, a) = (j.k, j.b, j.a);
                    let f = n / k;
                    let df = dn / k - b * (n / (k * k));
                    let ddf = ddn / k - 2.0 * (dn * b.conj()).re / (k * k) - n * a / (k * k)
                        + 2.0 * n * b.norm_sqr() / (k * k * k);
                    (f, df, ddf)
                },
            )
            .collect();
        Ok(FieldJets {
            f: vals.iter().map(|v| v.0).collect(),
            d: vals.iter().map(|v| v.1).collect(),
            dd: vals.iter().map(|v| v.2).collect(),
        })
    }

    /// `alpha self + beta other`.
    pub fn combine(&self, alpha: f64, other: &FieldJets, beta: f64) -> FieldJets {
        FieldJets {
            f: self.f.iter().zip(&other.f).map(|(a, b)| alpha * a + beta * b).collect(),
            d: self.d.iter().zip(&other.d).map(|(a, b)| a * alpha + b * beta).collect(),
            dd: self.dd.iter().zip(&other.dd).map(|(a, b)| alpha * a + beta * b).collect(),
        }
    }

    pub fn sup_norm(&self) -> f64 {
        self.f.iter().fold(0.0_f64, |a, v| a.max(v.abs()))
    }
}

/// `Δ'f = -(2/ρ) ∂∂̄f`, half the Riemannian Laplacian, nonnegative.
pub fn laplacian_half(m: &AlgebraicMetric, f: &FieldJets) -> Result<Vec<f64>> {
    if f.dd.len() != m.total_nodes() {
        return Err(Error::DimensionMismatch { expected: m.total_nodes(), got: f.dd.len() });
    }
    Ok(f.dd.iter().zip(&m.density).map(|(dd, r)| -2.0 * dd / r.rho).collect())
}

/// `∂∂̄g` at `(chart, t)` by a five-point stencil with one Richardson level.
pub fn ddbar_stencil<G: Fn(C64) -> f64>(g: G, t: C64) -> f64 {
    let lap = |h: f64| {
        let c = g(t);
        (g(t + h) + g(t - h) + g(t + C64::new(0.0, h)) + g(t - C64::new(0.0, h)) - 4.0 * c) / (4.0 * h * h)
    };
    let h = 1e-3 * (1.0 + t.norm());
    (4.0 * lap(0.5 * h) - lap(h)) / 3.0
}

/// Stencil version of [`laplacian_half`] for a function given pointwise.
pub fn laplacian_half_stencil<G: Fn(u8, C64) -> f64 + Sync>(
    m: &AlgebraicMetric,
    grid: &QuadratureGrid,
    g: G,
) -> Result<Vec<f64>> {
    m.check(grid)?;
    Ok((0..grid.total_nodes())
        .into_par_iter()
        .map(|i| {
            let n = grid.node(i);
            -2.0 * ddbar_stencil(|t| g(n.chart, t), n.t) / m.rho_vol(i)
        })
        .collect())
}

/// Scalar curvature samples with the topological average.
#[derive(Debug, Clone)]
pub struct Curvature {
    pub values: Vec<f64>,
    /// `4πχ / V`.
    pub s_hat: f64,
    /// `∫ S dμ`.
    pub integral: f64,
}

/// `S = -(4/ρ) ∂∂̄ log ρ` in closed form, so that `∫S dμ = 4πχ`.
pub fn scalar_curvature(m: &AlgebraicMetric, grid: &QuadratureGrid) -> Result<Curvature> {
    m.check(grid)?;
    let values: Vec<f64> = m.density.iter().map(DensityJet::scalar_curvature).collect();
    let integral = m.integrate(grid, |i| values[i]);
    Ok(Curvature { values, s_hat: grid.s_hat(), integral })
}

/// Scalar curvature by finite differences of the closed-form `log ρ`.
/// Needs pointwise section evaluation, so it is available for the
/// projective line only.
pub fn scalar_curvature_stencil(m: &AlgebraicMetric, grid: &QuadratureGrid) -> Result<Vec<f64>> {
    m.check(grid)?;
    grid.sections_at(0, C64::new(0.0, 0.0))?;
    let d = grid.dim();
    let log_rho = |chart: u8, t: C64| -> f64 {
        let (z, z1, z2) = grid.sections_at(chart, t).expect("checked above");
        let mut buf = vec![C64::new(0.0, 0.0); 3 * d];
        KernelJet::from_node(&m.p, &z, &z1, &z2, &mut buf).density().rho.ln()
    };
    Ok((0..grid.total_nodes())
        .into_par_iter()
        .map(|i| {
            let n = grid.node(i);
            -4.0 * ddbar_stencil(|t| log_rho(n.chart, t), n.t) / m.rho_vol(i)
        })
        .collect())
}

/// Result of [`gradient_identity_residual`].
#[derive(Debug, Clone, Copy)]
pub struct GradientIdentity {
    /// `max | |∇f|² - 2 Σ_α |(∇f, ∇s_α)|² |`.
    pub residual: f64,
    /// `max |∇f|²`.
    pub scale: f64,
}

/// Checks `|∇f|² = 2 Σ_α |(∇f, ∇s_α)|²` node-wise for an `H`-orthonormal
/// basis `s_α`, where `∇s_α = (∂s_α + s_α ∂ log(1/K)) dt` is the Chern
/// derivative and pairings use `FS(H)` on `L` and on `T*X`.
pub fn gradient_identity_residual(
    m: &AlgebraicMetric,
    f: &FieldJets,
    h: &GramMetric,
    grid: &QuadratureGrid,
) -> Result<GradientIdentity> {
    m.check(grid)?;
    let diff = (m.gram().entries() - h.entries()).iter().fold(0.0_f64, |a, z| a.max(z.norm()));
    let norm = h.entries().iter().fold(0.0_f64, |a, z| a.max(z.norm()));
    if diff > 1e-12 * norm || m.log_scale() != 0.0 {
        return Err(Error::InvalidGeometry("metric is not FS(H) for the given H".into()));
    }
    if f.d.len() != m.total_nodes() {
        return Err(Error::DimensionMismatch { expected: m.total_nodes(), got: f.d.len() });
    }
    let frame = h.orthonormal_frame();
    let d = grid.dim();
    let pairs: Vec<(f64, f64)> = (0..grid.total_nodes())
        .into_par_iter()
        .map(|i| {
            let n = grid.node(i);
            let j = m.jet(i);
            let rho = m.rho_vol(i);
            let df2 = f.d[i].norm_sqr();
            let grad2 = 4.0 * df2 / rho;
            let mut sum = 0.0;
            for alpha in 0..d {
                let mut s = C64::new(0.0, 0.0);
                let mut ds = C64::new(0.0, 0.0);
                for r in 0..d {
                    s += frame[(r, alpha)] * n.z[r];
                    ds += frame[(r, alpha)] * n.z1[r];
                }
                let sigma = ds - s * (j.b / j.k);
                let pairing = sigma * f.d[i].conj() * (2.0 / rho);
                sum += pairing.norm_sqr() / j.k;
            }
            ((grad2 - 2.0 * sum).abs(), grad2)
        })
        .collect();
    Ok(GradientIdentity {
        residual: pairs.iter().fold(0.0_f64, |a, p| a.max(p.0)),
        scale: pairs.iter().fold(0.0_f64, |a, p| a.max(p.1)),
    })
}
