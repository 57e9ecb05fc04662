//! The functionals `I`, `L`, `Z`, `L̃`, `Z̃`, `P`, `P̃` and the Mabuchi
//! functional, together with their derivative formulas.
//!
//! Functionals defined up to a constant are returned as differences from a
//! declared reference metric `h_ref`.

use crate::duality::{density_rho_jets, hilb};
use crate::hermitian::{Geodesic, GramMetric};
use crate::metrics::{fs_metric, laplacian_half, AlgebraicMetric, DensityJet, FieldJets};
use crate::reduce::tree_sum_by;
use crate::variety::QuadratureGrid;
use crate::{CMat, Error, Result, C64};
use serde::{Deserialize, Serialize};

/// Finite-difference step used by the derivative checks.
pub const FD_STEP: f64 = 1e-4;

/// `I(h) - I(h_ref)`. For curves `dμ_t` is affine along the linear path of
/// potentials, so the trapezoid rule `∫ φ (dμ_ref + dμ_h)/2` is exact.
pub fn i_functional(h: &AlgebraicMetric, h_ref: &AlgebraicMetric, grid: &QuadratureGrid) -> Result<f64> {
    h.check(grid)?;
    let phi = h.potential(h_ref)?;
    let w = grid.weights();
    Ok(tree_sum_by(phi.len(), |i| w[i] * phi[i] * 0.5 * (h.rho_vol(i) + h_ref.rho_vol(i))))
}

/// `I(h) - I(h_ref)` by Simpson's rule in the path parameter.
pub fn i_functional_path(
    h: &AlgebraicMetric,
    h_ref: &AlgebraicMetric,
    grid: &QuadratureGrid,
    steps: usize,
) -> Result<f64> {
    h.check(grid)?;
    let phi = h.potential(h_ref)?;
    let w = grid.weights();
    simpson(steps, |s| tree_sum_by(phi.len(), |i| w[i] * phi[i] * ((1.0 - s) * h_ref.rho_vol(i) + s * h.rho_vol(i))))
}

fn simpson<F: Fn(f64) -> f64>(steps: usize, f: F) -> Result<f64> {
    if steps < 2 || steps % 2 == 1 {
        return Err(Error::NonConvergent(format!("Simpson rule needs an even number of panels, got {steps}")));
    }
    let h = 1.0 / steps as f64;
    let mut acc = f(0.0) + f(1.0);
    for j in 1..steps {
        acc += if j % 2 == 1 { 4.0 } else { 2.0 } * f(j as f64 * h);
    }
    Ok(acc * h / 3.0)
}

/// `L(h) = log det Hilb(h)`.
pub fn l_functional(h: &AlgebraicMetric, grid: &QuadratureGrid) -> Result<f64> {
    Ok(hilb(h, grid)?.log_det())
}

/// `Z(H) = -I(FS(H))`, relative to `h_ref`.
pub fn z_functional(h: &GramMetric, h_ref: &AlgebraicMetric, grid: &QuadratureGrid) -> Result<f64> {
    Ok(-i_functional(&fs_metric(h, grid)?, h_ref, grid)?)
}

/// `L̃(h) = L(h) - (d/V) I(h)`.
pub fn l_tilde(h: &AlgebraicMetric, h_ref: &AlgebraicMetric, grid: &QuadratureGrid) -> Result<f64> {
    let d = grid.dim() as f64;
    Ok(l_functional(h, grid)? - d / grid.volume() * i_functional(h, h_ref, grid)?)
}

/// `Z̃(H) = Z(H) + (V/d) log det H`.
pub fn z_tilde(h: &GramMetric, h_ref: &AlgebraicMetric, grid: &QuadratureGrid) -> Result<f64> {
    let d = grid.dim() as f64;
    Ok(z_functional(h, h_ref, grid)? + grid.volume() / d * h.log_det())
}

/// `(L̃(h), Z̃(H))`.
pub fn tilde_pair(
    h: &AlgebraicMetric,
    gram: &GramMetric,
    h_ref: &AlgebraicMetric,
    grid: &QuadratureGrid,
) -> Result<(f64, f64)> {
    Ok((l_tilde(h, h_ref, grid)?, z_tilde(gram, h_ref, grid)?))
}

/// `P(h, H) = log Tr(Hilb(h) H^{-1})`.
pub fn p_functional(h: &AlgebraicMetric, gram: &GramMetric, grid: &QuadratureGrid) -> Result<f64> {
    let g = hilb(h, grid)?;
    p_from_hilb(&g, gram)
}

fn p_from_hilb(g: &GramMetric, gram: &GramMetric) -> Result<f64> {
    if g.dim() != gram.dim() {
        return Err(Error::DimensionMismatch { expected: g.dim(), got: gram.dim() });
    }
    let tr: C64 = (g.entries() * gram.inverse()).trace();
    Ok(tr.re.ln())
}

/// `(P, P̃)` with `P̃ = P - log d + (1/d) log det H - I(h)/V`.
pub fn p_potential(
    h: &AlgebraicMetric,
    gram: &GramMetric,
    h_ref: &AlgebraicMetric,
    grid: &QuadratureGrid,
) -> Result<(f64, f64)> {
    let p = p_functional(h, gram, grid)?;
    let d = grid.dim() as f64;
    let pt = p - d.ln() + gram.log_det() / d - i_functional(h, h_ref, grid)? / grid.volume();
    Ok((p, pt))
}

/// `P̃(h, H) - P̃(FS(H), H)`, nonnegative.
pub fn fs_gap(h: &AlgebraicMetric, gram: &GramMetric, grid: &QuadratureGrid) -> Result<f64> {
    let fs = fs_metric(gram, grid)?;
    let p_h = p_functional(h, gram, grid)?;
    let p_fs = p_functional(&fs, gram, grid)?;
    Ok(p_h - p_fs - i_functional(h, &fs, grid)? / grid.volume())
}

/// `P̃(h, H) - P̃(h, Hilb(h))`, nonnegative.
pub fn hilb_gap(h: &AlgebraicMetric, gram: &GramMetric, grid: &QuadratureGrid) -> Result<f64> {
    let g = hilb(h, grid)?;
    let d = grid.dim() as f64;
    Ok(p_from_hilb(&g, gram)? - p_from_hilb(&g, &g)? + (gram.log_det() - g.log_det()) / d)
}

/// `log(Tr Q/d) - (1/d) log det Q` with `Q = H^{-1/2} Hilb(h) H^{-1/2}`.
pub fn hilb_gap_closed_form(h: &AlgebraicMetric, gram: &GramMetric, grid: &QuadratureGrid) -> Result<f64> {
    let g = hilb(h, grid)?;
    let f = gram.orthonormal_frame();
    let q = GramMetric::new(f.adjoint() * g.entries() * &f)?;
    let d = grid.dim() as f64;
    Ok((q.trace() / d).ln() - q.log_det() / d)
}

/// Value of a path integral with an error estimate from halving the panels.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MabuchiValue {
    pub value: f64,
    pub error_estimate: f64,
}

/// `𝓜(h) - 𝓜(h_ref)` by integrating `δ𝓜 = ∫ (S - Ŝ) δφ dμ` along the
/// linear path of potentials with Simpson's rule.
pub fn mabuchi(
    h: &AlgebraicMetric,
    h_ref: &AlgebraicMetric,
    grid: &QuadratureGrid,
    steps: usize,
) -> Result<MabuchiValue> {
    if steps < 8 || !steps.is_multiple_of(4) {
        return Err(Error::NonConvergent(format!("mabuchi needs a multiple of 4 panels, at least 8; got {steps}")));
    }
    h.check(grid)?;
    let phi = h.potential(h_ref)?;
    let w = grid.weights();
    let s_hat = grid.s_hat();
    let d0 = h_ref.density_jets();
    let d1 = h.density_jets();
    let n = steps;
    let samples: Vec<f64> = (0..=n)
        .map(|j| {
            let s = j as f64 / n as f64;
            tree_sum_by(phi.len(), |i| {
                let jet: DensityJet = d0[i].lerp(&d1[i], s);
                w[i] * (jet.scalar_curvature() - s_hat) * phi[i] * jet.rho
            })
        })
        .collect();
    let fine = simpson_samples(&samples, 1);
    let coarse = simpson_samples(&samples, 2);
    let error_estimate = (fine - coarse).abs() / 15.0;
    let scale = tree_sum_by(phi.len(), |i| w[i] * phi[i].abs() * d1[i].rho) * (s_hat.abs() + 1.0);
    if !fine.is_finite() || error_estimate > 1e-3 * (fine.abs() + scale) {
        return Err(Error::NonConvergent(format!(
            "Simpson estimate {fine:.6e} with error {error_estimate:.3e} at {steps} panels"
        )));
    }
    Ok(MabuchiValue { value: fine, error_estimate })
}

/// Simpson's rule on `samples[0], samples[stride], …`.
fn simpson_samples(samples: &[f64], stride: usize) -> f64 {
    let n = (samples.len() - 1) / stride;
    let h = 1.0 / n as f64;
    let mut acc = samples[0] + samples[n * stride];
    for j in 1..n {
        acc += if j % 2 == 1 { 4.0 } else { 2.0 } * samples[j * stride];
    }
    acc * h / 3.0
}

/// The curve `t -> e^{c + t dc} FS(H + t dH)` of algebraic metrics.
#[derive(Debug, Clone)]
pub struct AlgebraicPath {
    pub gram: GramMetric,
    pub log_scale: f64,
    pub d_gram: CMat,
    pub d_log_scale: f64,
}

impl AlgebraicPath {
    pub fn new(gram: &GramMetric, log_scale: f64, d_gram: &CMat, d_log_scale: f64) -> Result<Self> {
        if d_gram.nrows() != gram.dim() || d_gram.ncols() != gram.dim() {
            return Err(Error::DimensionMismatch { expected: gram.dim(), got: d_gram.nrows() });
        }
        Ok(AlgebraicPath { gram: gram.clone(), log_scale, d_gram: d_gram.clone(), d_log_scale })
    }

    pub fn gram_at(&self, t: f64) -> Result<GramMetric> {
        GramMetric::new(self.gram.entries() + &self.d_gram * C64::new(t, 0.0))
    }

    pub fn at(&self, t: f64, grid: &QuadratureGrid) -> Result<AlgebraicMetric> {
        AlgebraicMetric::new(&self.gram_at(t)?, self.log_scale + t * self.d_log_scale, grid)
    }

    /// `φ̇ = dc + z^T P dH P z̄ / K` at `t = 0`.
    pub fn phi_dot(&self, m: &AlgebraicMetric, grid: &QuadratureGrid) -> Result<FieldJets> {
        let p = m.inverse_gram();
        let q = p * &self.d_gram * p;
        let ratio = FieldJets::hermitian_ratio(m, grid, &crate::hermitian::hermitize(&q))?;
        Ok(ratio.combine(1.0, &FieldJets::constant(ratio.f.len(), self.d_log_scale), 1.0))
    }
}

/// Central difference with one Richardson level.
fn richardson<F: Fn(f64) -> Result<f64>>(f: F, step: f64) -> Result<f64> {
    let central = |h: f64| -> Result<f64> { Ok((f(h)? - f(-h)?) / (2.0 * h)) };
    let a = central(step)?;
    let b = central(0.5 * step)?;
    Ok((4.0 * b - a) / 3.0)
}

/// A derivative formula compared with finite differences.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DerivativeCheck {
    pub numeric: f64,
    pub formula: f64,
    pub scale: f64,
    /// `|numeric - formula| / scale`.
    pub residual: f64,
}

impl DerivativeCheck {
    fn new(numeric: f64, formula: f64, scale: f64) -> Self {
        DerivativeCheck { numeric, formula, scale, residual: (numeric - formula).abs() / scale }
    }
}

/// `dL/dt` against `∫ (Δ'ρ_h + ρ_h) φ̇ dμ_h`, scaled by `∫ |φ̇| ρ_h dμ_h`.
pub fn derivative_check_l(path: &AlgebraicPath, grid: &QuadratureGrid) -> Result<DerivativeCheck> {
    let m = path.at(0.0, grid)?;
    let g = hilb(&m, grid)?;
    let rho = density_rho_jets(&m, grid, &g)?;
    let lap = laplacian_half(&m, &rho)?;
    let phi_dot = path.phi_dot(&m, grid)?;
    let formula = m.integrate(grid, |i| (lap[i] + rho.f[i]) * phi_dot.f[i]);
    let scale = m.integrate(grid, |i| phi_dot.f[i].abs() * rho.f[i]);
    let numeric = richardson(|t| l_functional(&path.at(t, grid)?, grid), FD_STEP)?;
    Ok(DerivativeCheck::new(numeric, formula, scale))
}

/// Directional derivative of `L̃` along `path`:
/// `∫ (Δ'ρ_h + ρ_h - d/V) φ̇ dμ_h`.
pub fn l_tilde_derivative(path: &AlgebraicPath, grid: &QuadratureGrid) -> Result<f64> {
    let m = path.at(0.0, grid)?;
    let g = hilb(&m, grid)?;
    let rho = density_rho_jets(&m, grid, &g)?;
    let lap = laplacian_half(&m, &rho)?;
    let phi_dot = path.phi_dot(&m, grid)?;
    let c = grid.dim() as f64 / grid.volume();
    Ok(m.integrate(grid, |i| (lap[i] + rho.f[i] - c) * phi_dot.f[i]))
}

/// `dZ/dt` along `H + t dH` against the two candidate formulas.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ZDerivativeCheck {
    pub numeric: f64,
    /// `-∫ φ̇ dμ`, the derivative of `-I ∘ FS` with `φ̇ = z^T P dH P z̄ / K`.
    pub formula: f64,
    /// `+Σ_αβ ∫ dH_αβ (s_α, s_β) dμ` with `dH` in an `H`-orthonormal basis.
    pub formula_opposite_sign: f64,
    pub scale: f64,
    pub residual: f64,
    pub residual_opposite_sign: f64,
}

pub fn derivative_check_z(
    gram: &GramMetric,
    d_gram: &CMat,
    h_ref: &AlgebraicMetric,
    grid: &QuadratureGrid,
) -> Result<ZDerivativeCheck> {
    let m = fs_metric(gram, grid)?;
    let a = gram.orthonormal_frame();
    let dh = a.adjoint() * d_gram * &a;
    let d = grid.dim();
    let pairing: Vec<f64> = (0..grid.total_nodes())
        .map(|i| {
            let n = grid.node(i);
            let s: Vec<C64> = (0..d).map(|al| (0..d).map(|r| a[(r, al)] * n.z[r]).sum()).collect();
            let mut acc = C64::new(0.0, 0.0);
            for al in 0..d {
                for be in 0..d {
                    acc += dh[(al, be)] * s[al] * s[be].conj();
                }
            }
            acc.re / m.kernel(i)
        })
        .collect();
    let printed = m.integrate(grid, |i| pairing[i]);
    let path = AlgebraicPath::new(gram, 0.0, d_gram, 0.0)?;
    let phi_dot = path.phi_dot(&m, grid)?;
    let formula = -m.integrate(grid, |i| phi_dot.f[i]);
    let scale = m.integrate(grid, |i| phi_dot.f[i].abs());
    let numeric = richardson(|t| z_functional(&path.gram_at(t)?, h_ref, grid), FD_STEP)?;
    Ok(ZDerivativeCheck {
        numeric,
        formula,
        formula_opposite_sign: printed,
        scale,
        residual: (numeric - formula).abs() / scale,
        residual_opposite_sign: (numeric - printed).abs() / scale,
    })
}

/// Directional derivative of `Z̃` along `H + t dH`:
/// `-∫ φ̇ dμ + (V/d) Tr(H^{-1} dH)`.
pub fn z_tilde_derivative(gram: &GramMetric, d_gram: &CMat, grid: &QuadratureGrid) -> Result<f64> {
    let m = fs_metric(gram, grid)?;
    let path = AlgebraicPath::new(gram, 0.0, d_gram, 0.0)?;
    let phi_dot = path.phi_dot(&m, grid)?;
    let tr = (gram.inverse() * d_gram).trace().re;
    Ok(-m.integrate(grid, |i| phi_dot.f[i]) + grid.volume() / grid.dim() as f64 * tr)
}

/// First variation of `𝓜` along `path` against `∫ (S - Ŝ) φ̇ dμ`.
pub fn mabuchi_variation_check(path: &AlgebraicPath, grid: &QuadratureGrid) -> Result<DerivativeCheck> {
    let m = path.at(0.0, grid)?;
    let phi_dot = path.phi_dot(&m, grid)?;
    let s_hat = grid.s_hat();
    let curv: Vec<f64> = m.density_jets().iter().map(DensityJet::scalar_curvature).collect();
    let formula = m.integrate(grid, |i| (curv[i] - s_hat) * phi_dot.f[i]);
    let scale = m.integrate(grid, |i| ((curv[i] - s_hat) * phi_dot.f[i]).abs());
    let central = |h: f64| -> Result<f64> {
        let plus = path.at(h, grid)?;
        let minus = path.at(-h, grid)?;
        Ok(mabuchi(&plus, &minus, grid, 8)?.value / (2.0 * h))
    };
    let a = central(FD_STEP)?;
    let b = central(0.5 * FD_STEP)?;
    Ok(DerivativeCheck::new((4.0 * b - a) / 3.0, formula, scale))
}

/// Every functional evaluated at a pair `(h, H)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FunctionalReport {
    pub i_rel: f64,
    pub l: f64,
    pub z: f64,
    pub l_tilde: f64,
    pub z_tilde: f64,
    pub p: f64,
    pub p_tilde: f64,
    pub mabuchi_rel: f64,
    pub reference: String,
}

pub fn functional_report(
    h: &AlgebraicMetric,
    gram: &GramMetric,
    h_ref: &AlgebraicMetric,
    reference: &str,
    grid: &QuadratureGrid,
    mabuchi_steps: usize,
) -> Result<FunctionalReport> {
    let i_rel = i_functional(h, h_ref, grid)?;
    let l = l_functional(h, grid)?;
    let z = z_functional(gram, h_ref, grid)?;
    let d = grid.dim() as f64;
    let v = grid.volume();
    let (p, p_tilde) = p_potential(h, gram, h_ref, grid)?;
    Ok(FunctionalReport {
        i_rel,
        l,
        z,
        l_tilde: l - d / v * i_rel,
        z_tilde: z + v / d * gram.log_det(),
        p,
        p_tilde,
        mabuchi_rel: mabuchi(h, h_ref, grid, mabuchi_steps)?.value,
        reference: reference.to_string(),
    })
}

/// Second differences of `Z` sampled along a geodesic.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConvexitySample {
    /// `Z(t_j)` at equispaced `t_j` in `[0, 1]`.
    pub z_values: Vec<f64>,
    /// `Z(t_{j-1}) - 2 Z(t_j) + Z(t_{j+1})` at interior samples.
    pub second_differences: Vec<f64>,
    /// `V (1 + max |λ|)`, the size of `Z` variations along the geodesic.
    pub scale: f64,
    /// Largest deviation of `log det H_t` from the affine interpolant.
    pub log_det_affine_residual: f64,
}

pub fn z_along_geodesic(
    g: &Geodesic,
    h_ref: &AlgebraicMetric,
    grid: &QuadratureGrid,
    samples: usize,
) -> Result<ConvexitySample> {
    let n = samples.max(3);
    let ts: Vec<f64> = (0..n).map(|j| j as f64 / (n - 1) as f64).collect();
    let mut z_values = Vec::with_capacity(n);
    let mut log_det_affine_residual = 0.0_f64;
    let l0 = g.base().log_det();
    let slope: f64 = g.rates().iter().sum();
    for &t in &ts {
        let h = g.value(t);
        z_values.push(z_functional(&h, h_ref, grid)?);
        let affine = l0 + t * slope;
        log_det_affine_residual = log_det_affine_residual.max((h.log_det() - affine).abs() / (1.0 + affine.abs()));
    }
    let second_differences = z_values.windows(3).map(|w| w[0] - 2.0 * w[1] + w[2]).collect();
    let lmax = g.rates().iter().fold(0.0_f64, |a, r| a.max(r.abs()));
    Ok(ConvexitySample { z_values, second_differences, scale: grid.volume() * (1.0 + lmax), log_det_affine_residual })
}

/// The three links of the inequality chain
/// `P̃(h,H) >= P̃(FS(H),H) >= P̃(FS(H*),H*) = P̃(h*,H*)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ChainLinks {
    /// `P̃(h,H) - P̃(FS(H),H)`.
    pub first: f64,
    /// `P̃(FS(H),H) - P̃(FS(H*),H*) = (Z̃(H) - Z̃(H*)) / V`.
    pub second: f64,
    /// `P̃(FS(H*),H*) - P̃(h*, Hilb(h*))` with `h* = FS(H*)`; zero at balance.
    pub third: f64,
}

pub fn chain_links(
    h: &AlgebraicMetric,
    gram: &GramMetric,
    balanced: &GramMetric,
    h_ref: &AlgebraicMetric,
    grid: &QuadratureGrid,
) -> Result<ChainLinks> {
    let p_h = p_potential(h, gram, h_ref, grid)?.1;
    let fs = fs_metric(gram, grid)?;
    let p_fs = p_potential(&fs, gram, h_ref, grid)?.1;
    let h_star = fs_metric(balanced, grid)?;
    let p_star = p_potential(&h_star, balanced, h_ref, grid)?.1;
    let g_star = hilb(&h_star, grid)?;
    let p_star_hilb = p_potential(&h_star, &g_star, h_ref, grid)?.1;
    Ok(ChainLinks { first: p_h - p_fs, second: p_fs - p_star, third: p_star - p_star_hilb })
}
