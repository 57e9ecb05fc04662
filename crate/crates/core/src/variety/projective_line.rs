//! `O(k)` on the projective line with the monomial basis `1, t, …, t^k`.
//!
//! Chart 0 is the affine coordinate `t` on `|t| <= 1`; chart 1 is `w = 1/t` on
//! `|w| < 1`, where the basis reads `w^k, w^{k-1}, …, 1`.

use super::quadrature::plane_rule;
use super::{GeometrySpec, GridBuilder, QuadratureGrid};
use crate::C64;
use rayon::prelude::*;
use std::f64::consts::PI;

pub fn default_resolution(k: usize) -> [usize; 2] {
    [64.max(k / 2 + 1), 64.max(4 * k + 4)]
}

/// `C(k, j)` as a float.
pub fn binomial(k: usize, j: usize) -> f64 {
    let j = j.min(k - j);
    (0..j).fold(1.0, |acc, i| acc * (k - i) as f64 / (i + 1) as f64)
}

/// Sections and their first two `t`-derivatives in the given chart.
pub fn sections(k: usize, chart: u8, t: C64) -> (Vec<C64>, Vec<C64>, Vec<C64>) {
    let d = k + 1;
    let mut pw = vec![C64::new(1.0, 0.0); d];
    for j in 1..d {
        pw[j] = pw[j - 1] * t;
    }
    let zero = C64::new(0.0, 0.0);
    let mono = |e: usize| -> (C64, C64, C64) {
        let f = e as f64;
        let d1 = if e >= 1 { pw[e - 1] * f } else { zero };
        let d2 = if e >= 2 { pw[e - 2] * (f * (f - 1.0)) } else { zero };
        (pw[e], d1, d2)
    };
    let (mut z, mut z1, mut z2) = (Vec::with_capacity(d), Vec::with_capacity(d), Vec::with_capacity(d));
    for j in 0..d {
        let e = if chart == 0 { j } else { k - j };
        let (a, b, c) = mono(e);
        z.push(a);
        z1.push(b);
        z2.push(c);
    }
    (z, z1, z2)
}

pub(crate) fn build(spec: &GeometrySpec) -> QuadratureGrid {
    let k = spec.k;
    let [radial, angular] = spec.resolution();
    let plane = plane_rule(radial, angular);
    let rows: Vec<GridBuilder> = plane
        .par_chunks(angular)
        .map(|row| {
            let mut b = GridBuilder::new(k + 1, row.len());
            for n in row {
                let (chart, r, weight) = if n.u <= 1.0 {
                    (0u8, n.u.sqrt(), n.weight)
                } else {
                    (1u8, 1.0 / n.u.sqrt(), n.weight / (n.u * n.u))
                };
                let sign = if chart == 0 { 1.0 } else { -1.0 };
                let t = C64::from_polar(r, sign * n.theta);
                let (z, z1, z2) = sections(k, chart, t);
                b.push(chart, t, weight, &z, &z1, &z2);
            }
            b
        })
        .collect();
    let mut out = GridBuilder::new(k + 1, plane.len());
    for r in rows {
        out.append(r);
    }
    out.finish(spec.clone())
}

/// Worst relative error of `∫ |t^j|² / (1+|t|²)^{k+2} dx dy = π j!(k-j)!/(k+1)!`.
pub(crate) fn beta_residual(grid: &QuadratureGrid) -> f64 {
    let k = grid.k();
    (0..=k)
        .map(|j| {
            let q = grid.integrate_by(|i| {
                let n = grid.node(i);
                n.z[j].norm_sqr() / (1.0 + n.t.norm_sqr()).powi(k as i32 + 2)
            });
            let exact = PI / ((k + 1) as f64 * binomial(k, j));
            (q / exact - 1.0).abs()
        })
        .fold(0.0, f64::max)
}
