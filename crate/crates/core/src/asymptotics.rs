//! Large-`k` behaviour on the projective line.
//!
//! A metric in the fixed class is given by a Hermitian kernel `K0` on `O(k0)`;
//! on `O(k)` with `k = m k0` it is represented by `K0^m`, so the underlying
//! Kähler potential is the same for every `k`. Quantities computed on
//! `O(k)` (with volume `2πk`) are converted to the fixed class by
//! `dμ = dμ_k / k`, `Δ' = k Δ'_k`, `S = k S_k`, and the Bergman expansion is
//! taken in the curvature normalization `S / 4`, in which the round sphere of
//! area `2π` has curvature 1 and `ρ_k = (k + 1)/2π`.

use crate::duality::{density_rho_jets, hilb};
use crate::functionals::{i_functional, mabuchi};
use crate::hermitian::GramMetric;
use crate::metrics::{laplacian_half, scalar_curvature, AlgebraicMetric};
use crate::sampling;
use crate::variety::{projective_line::binomial, GeometrySpec, QuadratureGrid};
use crate::{CMat, Error, Result, C64};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use std::f64::consts::PI;

/// A fiber metric on `O(1)^{k0}` over the projective line, `1 / K0` with
/// `K0 = Σ_ij C_ij t^i t̄^j`.
#[derive(Debug, Clone, PartialEq)]
pub struct FixedClassMetric {
    k0: usize,
    coeffs: CMat,
}

impl FixedClassMetric {
    /// From the Gram matrix `H0` on `O(k0)`: `C = H0^{-1}`.
    pub fn from_gram(h0: &GramMetric) -> Self {
        FixedClassMetric { k0: h0.dim() - 1, coeffs: h0.inverse() }
    }

    /// The round metric `(1 + |t|²)^{-k0}`.
    pub fn round(k0: usize) -> Self {
        let diag: Vec<f64> = (0..=k0).map(|j| 1.0 / binomial(k0, j)).collect();
        Self::from_gram(&GramMetric::from_diagonal(&diag).expect("positive diagonal"))
    }

    /// Seeded perturbation `L exp(εA) L^†` of the round Gram matrix on `O(k0)`.
    pub fn perturbed(k0: usize, eps: f64, seed: u64) -> Self {
        let diag: Vec<f64> = (0..=k0).map(|j| 1.0 / binomial(k0, j)).collect();
        let base = GramMetric::from_diagonal(&diag).expect("positive diagonal");
        Self::from_gram(&sampling::perturb(&base, eps, &mut sampling::rng(seed)))
    }

    pub fn base_level(&self) -> usize {
        self.k0
    }

    /// Gram matrix of the same potential on `O(k)`.
    pub fn gram_at(&self, k: usize) -> Result<GramMetric> {
        if k == 0 || !k.is_multiple_of(self.k0) {
            return Err(Error::InvalidGeometry(format!("k = {k} is not a positive multiple of k0 = {}", self.k0)));
        }
        let mut c = CMat::from_element(1, 1, C64::new(1.0, 0.0));
        for _ in 0..k / self.k0 {
            c = convolve(&c, &self.coeffs);
        }
        let c = GramMetric::new(crate::hermitian::hermitize(&c))?;
        GramMetric::new(c.inverse())
    }
}

/// Coefficients of the product of two kernels `Σ a_ij t^i t̄^j`.
fn convolve(a: &CMat, b: &CMat) -> CMat {
    let n = a.nrows() + b.nrows() - 1;
    let mut out = CMat::zeros(n, n);
    for i in 0..b.nrows() {
        for j in 0..b.ncols() {
            let c = b[(i, j)];
            for r in 0..a.nrows() {
                for s in 0..a.ncols() {
                    out[(i + r, j + s)] += c * a[(r, s)];
                }
            }
        }
    }
    out
}

/// `f - f̂`, subtracting the `dμ` average.
pub fn bracket(values: &[f64], m: &AlgebraicMetric, grid: &QuadratureGrid) -> Vec<f64> {
    let mean = m.integrate(grid, |i| values[i]) / m.mass();
    values.iter().map(|v| v - mean).collect()
}

fn level(k: usize, metric: &FixedClassMetric) -> Result<(QuadratureGrid, AlgebraicMetric)> {
    let (grid, _) = crate::variety::build_geometry(&GeometrySpec::projective_line(k))?;
    let m = AlgebraicMetric::new(&metric.gram_at(k)?, 0.0, &grid)?;
    Ok((grid, m))
}

/// `‖[Δ'ρ_k + kρ_k] - (1/2π) k [S/4]‖_∞ / k` for the fixed-class metric at level `k`.
pub fn bergman_residual(k: usize, metric: &FixedClassMetric) -> Result<f64> {
    let (grid, m) = level(k, metric)?;
    bergman_residual_on(&grid, &m)
}

/// Same as [`bergman_residual`] for a metric already on the level-`k` grid.
///
/// With level quantities (`ρ̂`, `Δ̂'`, `Ŝ` for volume `2πk`) this equals
/// `k ‖[Δ̂'ρ̂ + ρ̂] - [Ŝ]/8π‖_∞`.
pub fn bergman_residual_on(grid: &QuadratureGrid, m: &AlgebraicMetric) -> Result<f64> {
    let k = grid.k() as f64;
    let g = hilb(m, grid)?;
    let rho = density_rho_jets(m, grid, &g)?;
    let lap = laplacian_half(m, &rho)?;
    let s = scalar_curvature(m, grid)?.values;
    let lhs: Vec<f64> = lap.iter().zip(&rho.f).map(|(a, b)| a + b).collect();
    let lhs = bracket(&lhs, m, grid);
    let rhs = bracket(&s, m, grid);
    Ok(k * lhs.iter().zip(&rhs).fold(0.0_f64, |a, (l, r)| a.max((l - r / (8.0 * PI)).abs())))
}

/// Terms of the comparison between `(2π/k) ΔL̃_k` and `Δ𝓜`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MabuchiGap {
    pub k: usize,
    /// `(2π/k) (L̃_k(h1) - L̃_k(h0))`.
    pub l_tilde_term: f64,
    /// `𝓜(h1) - 𝓜(h0)` in the fixed class.
    pub mabuchi_term: f64,
    pub gap: f64,
    /// `gap / |mabuchi_term|`.
    pub relative_gap: f64,
}

/// `|(2π/k)(L̃_k(h1) - L̃_k(h0)) - (𝓜(h1) - 𝓜(h0))|`.
pub fn mabuchi_approximation_gap(
    k: usize,
    h0: &FixedClassMetric,
    h1: &FixedClassMetric,
    steps: usize,
) -> Result<MabuchiGap> {
    if h0.k0 != h1.k0 {
        return Err(Error::DimensionMismatch { expected: h0.k0, got: h1.k0 });
    }
    let (grid, m0) = level(k, h0)?;
    let m1 = AlgebraicMetric::new(&h1.gram_at(k)?, 0.0, &grid)?;
    mabuchi_gap_on(&grid, &m0, &m1, steps)
}

/// Same as [`mabuchi_approximation_gap`] for metrics on the level-`k` grid.
pub fn mabuchi_gap_on(
    grid: &QuadratureGrid,
    m0: &AlgebraicMetric,
    m1: &AlgebraicMetric,
    steps: usize,
) -> Result<MabuchiGap> {
    let k = grid.k();
    let kf = k as f64;
    let d = grid.dim() as f64;
    let dl = hilb(m1, grid)?.log_det() - hilb(m0, grid)?.log_det();
    let dl_tilde = dl - d / grid.volume() * i_functional(m1, m0, grid)?;
    let l_tilde_term = 2.0 * PI / kf * dl_tilde;
    let mabuchi_term = mabuchi(m1, m0, grid, steps)?.value / (4.0 * kf);
    let gap = (l_tilde_term - mabuchi_term).abs();
    let relative_gap = if mabuchi_term == 0.0 {
        if gap == 0.0 {
            0.0
        } else {
            f64::INFINITY
        }
    } else {
        gap / mabuchi_term.abs()
    };
    Ok(MabuchiGap { k, l_tilde_term, mabuchi_term, gap, relative_gap })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SweepRow {
    pub k: usize,
    pub bergman_residual: f64,
    pub mabuchi_gap: f64,
    pub mabuchi_relative_gap: f64,
}

/// Bergman residual of `h1` and the Mabuchi gap between `h0` and `h1` for each `k`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AsymptoticSweep {
    pub k_values: Vec<usize>,
    pub rows: Vec<SweepRow>,
}

impl AsymptoticSweep {
    pub const CSV_HEADER: &'static str = "k,bergman_residual,mabuchi_gap,mabuchi_relative_gap";

    pub fn run(k_values: &[usize], h0: &FixedClassMetric, h1: &FixedClassMetric, steps: usize) -> Result<Self> {
        if k_values.len() < 2 || k_values.windows(2).any(|w| w[0] >= w[1]) {
            return Err(Error::InvalidGeometry(
                "k_values must be strictly increasing with at least two entries".into(),
            ));
        }
        let rows = k_values
            .par_iter()
            .map(|&k| -> Result<SweepRow> {
                let (grid, m0) = level(k, h0)?;
                let m1 = AlgebraicMetric::new(&h1.gram_at(k)?, 0.0, &grid)?;
                let gap = mabuchi_gap_on(&grid, &m0, &m1, steps)?;
                Ok(SweepRow {
                    k,
                    bergman_residual: bergman_residual_on(&grid, &m1)?,
                    mabuchi_gap: gap.gap,
                    mabuchi_relative_gap: gap.relative_gap,
                })
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(AsymptoticSweep { k_values: k_values.to_vec(), rows })
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::from(Self::CSV_HEADER);
        out.push('\n');
        for r in &self.rows {
            out.push_str(&format!(
                "{},{:.17e},{:.17e},{:.17e}\n",
                r.k, r.bergman_residual, r.mabuchi_gap, r.mabuchi_relative_gap
            ));
        }
        out
    }
}

/// Whether `values` never increase, optionally forgiving an increase
/// between the first two entries.
pub fn is_non_increasing(values: &[f64], allow_first_inversion: bool) -> bool {
    values.windows(2).enumerate().all(|(i, w)| w[1] <= w[0] || (allow_first_inversion && i == 0))
}
