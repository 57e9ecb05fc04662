//! The maps `Hilb: K -> M` and `FS: M -> K`, the density `ρ_h`, and the
//! operator `T = Hilb ∘ FS` on `M`.

use crate::hermitian::{map_distance, GramMetric};
use crate::metrics::{fs_metric, AlgebraicMetric, FieldJets};
use crate::reduce::tree_reduce;
use crate::variety::QuadratureGrid;
use crate::{CMat, Result, C64};
use serde::{Deserialize, Serialize};

/// `Hilb(h)_ij = (d/V) ∫ conj(s_i) s_j e^c/K dμ_h`.
pub fn hilb(m: &AlgebraicMetric, grid: &QuadratureGrid) -> Result<GramMetric> {
    m.check(grid)?;
    let d = grid.dim();
    let w = grid.weights();
    let scale = m.log_scale().exp() * d as f64 / grid.volume();
    let leaf = |r: std::ops::Range<usize>| {
        let mut acc = CMat::zeros(d, d);
        for i in r {
            let n = grid.node(i);
            let c = w[i] * m.rho_vol(i) / m.kernel(i);
            for a in 0..d {
                let za = n.z[a].conj() * c;
                for b in a..d {
                    acc[(a, b)] += za * n.z[b];
                }
            }
        }
        acc
    };
    let mut g = tree_reduce(grid.total_nodes(), &leaf, &|a, b| a + b).unwrap_or_else(|| CMat::zeros(d, d));
    for a in 0..d {
        g[(a, a)].im = 0.0;
        for b in 0..a {
            g[(a, b)] = g[(b, a)].conj();
        }
    }
    GramMetric::new(g * C64::new(scale, 0.0))
}

/// `ρ_h = (d/V) Σ_α |s_α|²_h` over a `Hilb(h)`-orthonormal basis, obtained
/// from the Cholesky factor of `Hilb(h)`.
pub fn density_rho(m: &AlgebraicMetric, grid: &QuadratureGrid) -> Result<Vec<f64>> {
    let g = hilb(m, grid)?;
    density_rho_with(m, grid, &g.orthonormal_frame())
}

/// `ρ_h` for an explicit `Hilb(h)`-orthonormal frame (columns).
pub fn density_rho_with(m: &AlgebraicMetric, grid: &QuadratureGrid, frame: &CMat) -> Result<Vec<f64>> {
    m.check(grid)?;
    let d = grid.dim();
    let c = m.log_scale().exp() * d as f64 / grid.volume();
    Ok((0..grid.total_nodes())
        .map(|i| {
            let n = grid.node(i);
            let sum: f64 = (0..d).map(|alpha| (0..d).map(|r| frame[(r, alpha)] * n.z[r]).sum::<C64>().norm_sqr()).sum();
            c * sum / m.kernel(i)
        })
        .collect())
}

/// `ρ_h` with derivatives, from `(d/V) e^c z^T G^{-1} z̄ / K` where `G = Hilb(h)`.
pub fn density_rho_jets(m: &AlgebraicMetric, grid: &QuadratureGrid, hilb_h: &GramMetric) -> Result<FieldJets> {
    let c = m.log_scale().exp() * grid.dim() as f64 / grid.volume();
    let q = hilb_h.inverse() * C64::new(c, 0.0);
    FieldJets::hermitian_ratio(m, grid, &q)
}

/// `T(H) = Hilb(FS(H))`.
pub fn t_operator(h: &GramMetric, grid: &QuadratureGrid) -> Result<GramMetric> {
    hilb(&fs_metric(h, grid)?, grid)
}

/// How far `(FS(H), H)` is from a balanced pair.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BalancedResidual {
    /// `max |ρ - d/V| / (d/V)` for `ρ` of `FS(H)`.
    pub rho_flatness: f64,
    /// Scale-invariant distance between `H` and `T(H)`.
    pub map_distance: f64,
}

/// Residuals of `H` together with `T(H)`.
pub fn balanced_residual_full(h: &GramMetric, grid: &QuadratureGrid) -> Result<(BalancedResidual, GramMetric)> {
    let m = fs_metric(h, grid)?;
    let g = hilb(&m, grid)?;
    let target = grid.dim() as f64 / grid.volume();
    let rho = density_rho_jets(&m, grid, &g)?.f;
    let rho_flatness = rho.iter().fold(0.0_f64, |a, r| a.max((r - target).abs())) / target;
    Ok((BalancedResidual { rho_flatness, map_distance: map_distance(h, &g) }, g))
}

pub fn balanced_residual(h: &GramMetric, grid: &QuadratureGrid) -> Result<BalancedResidual> {
    Ok(balanced_residual_full(h, grid)?.0)
}
