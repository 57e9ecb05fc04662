//! `O(k)` restricted to a smooth plane cubic `F(x, y, z) = 0`.
//!
//! Basis: monomials `x^a y^b z^c` with `a + b + c = k` and `c <= 2`; using
//! `F = 0` to eliminate `z³` these span the restriction of `H⁰(P², O(k))`,
//! of dimension `3k`.
//!
//! Quadrature: for each coordinate vertex `e_v` the projection from `e_v` is a
//! threefold cover of a line. Each line is covered by the two patches
//! `|t| <= 1` of its affine coordinates, every base node lifts to the three
//! roots of `F` in the remaining variable, and the three projections are
//! blended by the partition of unity `|F_v|^{2m} / Σ_i |F_i|^{2m}`.

use super::quadrature::plane_rule;
use super::{GeometrySpec, GridBuilder, QuadratureGrid};
use crate::{Error, Result, C64};
use nalgebra::Matrix6;
use rayon::prelude::*;
use std::collections::BTreeMap;

/// Exponents of the coefficient order used by [`CubicForm`].
pub const EXPONENTS: [[usize; 3]; 10] =
    [[3, 0, 0], [2, 1, 0], [2, 0, 1], [1, 2, 0], [1, 1, 1], [1, 0, 2], [0, 3, 0], [0, 2, 1], [0, 1, 2], [0, 0, 3]];

/// `x³ + y³ + z³`.
pub const FERMAT: [f64; 10] = [1.0, 0.0, 0.0, 0.0, 0.0, 0.0, 1.0, 0.0, 0.0, 1.0];

/// Relative discriminant below which a cubic is treated as singular.
pub const SINGULAR_TOL: f64 = 1e-6;

/// Exponent of the partition-of-unity weights.
const PARTITION_POWER: i32 = 6;

/// Nodes whose partition weight falls below this are dropped.
const PARTITION_CUTOFF: f64 = 1e-18;

pub fn default_resolution(k: usize) -> [usize; 2] {
    [128, 128.max(4 * k + 4)]
}

type Poly = BTreeMap<[usize; 3], C64>;

fn poly_partial(p: &Poly, i: usize) -> Poly {
    let mut out = Poly::new();
    for (e, c) in p {
        if e[i] > 0 {
            let mut f = *e;
            f[i] -= 1;
            *out.entry(f).or_default() += c * e[i] as f64;
        }
    }
    out
}

fn poly_mul(a: &Poly, b: &Poly) -> Poly {
    let mut out = Poly::new();
    for (ea, ca) in a {
        for (eb, cb) in b {
            let e = [ea[0] + eb[0], ea[1] + eb[1], ea[2] + eb[2]];
            *out.entry(e).or_default() += ca * cb;
        }
    }
    out
}

fn poly_add(a: &Poly, b: &Poly, sign: f64) -> Poly {
    let mut out = a.clone();
    for (e, c) in b {
        *out.entry(*e).or_default() += c * sign;
    }
    out
}

/// A ternary cubic form.
#[derive(Debug, Clone, PartialEq)]
pub struct CubicForm {
    coeffs: [C64; 10],
}

impl CubicForm {
    /// Validates the coefficients: ten finite numbers, nonzero `x³`, `y³`, `z³`
    /// coefficients, and a smooth curve.
    pub fn new(coeffs: &[C64]) -> Result<Self> {
        if coeffs.len() != 10 {
            return Err(Error::InvalidGeometry(format!(
                "cubic_coefficients must have 10 entries, got {}",
                coeffs.len()
            )));
        }
        if coeffs.iter().any(|c| !c.re.is_finite() || !c.im.is_finite()) {
            return Err(Error::InvalidGeometry("cubic_coefficients must be finite".into()));
        }
        let mut c = [C64::new(0.0, 0.0); 10];
        c.copy_from_slice(coeffs);
        let form = CubicForm { coeffs: c };
        let scale = form.scale();
        for (idx, name) in [(0, "x³"), (6, "y³"), (9, "z³")] {
            if form.coeffs[idx].norm() <= 1e-8 * scale {
                return Err(Error::InvalidGeometry(format!("the {name} coefficient must be nonzero")));
            }
        }
        let disc = form.discriminant();
        if disc.norm() <= SINGULAR_TOL * scale.powi(12) {
            return Err(Error::SingularCubic(disc.norm()));
        }
        Ok(form)
    }

    pub fn coefficients(&self) -> &[C64; 10] {
        &self.coeffs
    }

    fn scale(&self) -> f64 {
        self.coeffs.iter().fold(0.0_f64, |a, c| a.max(c.norm()))
    }

    fn poly(&self) -> Poly {
        EXPONENTS.iter().zip(&self.coeffs).map(|(e, c)| (*e, *c)).collect()
    }

    /// Salmon's invariant: the determinant of the six quadrics
    /// `F_x, F_y, F_z, J_x, J_y, J_z` with `J` the Hessian determinant.
    /// Vanishes exactly when the curve is singular.
    pub fn discriminant(&self) -> C64 {
        let f = self.poly();
        let h: Vec<Vec<Poly>> =
            (0..3).map(|i| (0..3).map(|j| poly_partial(&poly_partial(&f, i), j)).collect()).collect();
        let minor = |a: usize, b: usize, c: usize, d: usize| {
            poly_add(&poly_mul(&h[1][a], &h[2][b]), &poly_mul(&h[1][c], &h[2][d]), -1.0)
        };
        let j = poly_add(
            &poly_add(&poly_mul(&h[0][0], &minor(1, 2, 2, 1)), &poly_mul(&h[0][1], &minor(0, 2, 2, 0)), -1.0),
            &poly_mul(&h[0][2], &minor(0, 1, 1, 0)),
            1.0,
        );
        let quadrics: Vec<Poly> =
            (0..3).map(|i| poly_partial(&f, i)).chain((0..3).map(|i| poly_partial(&j, i))).collect();
        let basis = [[2, 0, 0], [0, 2, 0], [0, 0, 2], [0, 1, 1], [1, 0, 1], [1, 1, 0]];
        let m = Matrix6::from_fn(|r, c| quadrics[r].get(&basis[c]).copied().unwrap_or_default());
        m.determinant()
    }

    pub fn eval(&self, p: &[C64; 3]) -> C64 {
        EXPONENTS
            .iter()
            .zip(&self.coeffs)
            .map(|(e, c)| c * p[0].powu(e[0] as u32) * p[1].powu(e[1] as u32) * p[2].powu(e[2] as u32))
            .sum()
    }

    pub fn gradient(&self, p: &[C64; 3]) -> [C64; 3] {
        let mut g = [C64::new(0.0, 0.0); 3];
        for (e, c) in EXPONENTS.iter().zip(&self.coeffs) {
            for i in 0..3 {
                if e[i] > 0 {
                    let mut f = *e;
                    f[i] -= 1;
                    g[i] += c * e[i] as f64 * monomial(p, &f);
                }
            }
        }
        g
    }

    pub fn hessian(&self, p: &[C64; 3]) -> [[C64; 3]; 3] {
        let mut h = [[C64::new(0.0, 0.0); 3]; 3];
        for (e, c) in EXPONENTS.iter().zip(&self.coeffs) {
            for i in 0..3 {
                for j in 0..3 {
                    let mut f = *e;
                    if f[i] == 0 {
                        continue;
                    }
                    let fi = f[i] as f64;
                    f[i] -= 1;
                    if f[j] == 0 {
                        continue;
                    }
                    let fj = f[j] as f64;
                    f[j] -= 1;
                    h[i][j] += c * fi * fj * monomial(p, &f);
                }
            }
        }
        h
    }

    /// Coefficients `[q0, q1, q2, q3]` of `F` as a polynomial in `p_v`
    /// with the other two coordinates fixed.
    fn slice(&self, v: usize, p: &[C64; 3]) -> [C64; 4] {
        let mut q = [C64::new(0.0, 0.0); 4];
        for (e, c) in EXPONENTS.iter().zip(&self.coeffs) {
            let mut rest = C64::new(1.0, 0.0);
            for i in 0..3 {
                if i != v {
                    rest *= p[i].powu(e[i] as u32);
                }
            }
            q[e[v]] += c * rest;
        }
        q
    }
}

fn monomial(p: &[C64; 3], e: &[usize; 3]) -> C64 {
    p[0].powu(e[0] as u32) * p[1].powu(e[1] as u32) * p[2].powu(e[2] as u32)
}

/// Exponents of the section basis.
pub fn section_exponents(k: usize) -> Vec<[usize; 3]> {
    let mut out = Vec::with_capacity(3 * k);
    for a in 0..=k {
        for b in 0..=k - a {
            let c = k - a - b;
            if c <= 2 {
                out.push([a, b, c]);
            }
        }
    }
    out
}

/// Roots of `q3 y³ + q2 y² + q1 y + q0` by Weierstrass iteration and Newton polish.
fn cubic_roots(q: &[C64; 4]) -> [C64; 3] {
    let a = [q[0] / q[3], q[1] / q[3], q[2] / q[3]];
    let p = |y: C64| ((y + a[2]) * y + a[1]) * y + a[0];
    let dp = |y: C64| (3.0 * y + 2.0 * a[2]) * y + a[1];
    let radius = 1.0 + a.iter().fold(0.0_f64, |m, c| m.max(c.norm()));
    let seed = C64::new(0.4, 0.9);
    let mut r = [C64::new(radius, 0.0), seed * radius, seed * seed * radius];
    for _ in 0..500 {
        let mut change = 0.0_f64;
        for i in 0..3 {
            let mut den = C64::new(1.0, 0.0);
            for j in 0..3 {
                if j != i {
                    den *= r[i] - r[j];
                }
            }
            if den.norm() == 0.0 {
                continue;
            }
            let step = p(r[i]) / den;
            r[i] -= step;
            change = change.max(step.norm() / (1.0 + r[i].norm()));
        }
        if change < 1e-15 {
            break;
        }
    }
    for y in r.iter_mut() {
        for _ in 0..2 {
            let d = dp(*y);
            if d.norm() > 0.0 {
                let step = p(*y) / d;
                if step.norm().is_finite() {
                    *y -= step;
                }
            }
        }
    }
    r
}

pub(crate) fn build(spec: &GeometrySpec) -> Result<QuadratureGrid> {
    let coeffs = spec
        .cubic_coefficients
        .as_ref()
        .ok_or_else(|| Error::InvalidGeometry("plane_cubic requires cubic_coefficients".into()))?;
    let form = CubicForm::new(coeffs)?;
    let k = spec.k;
    let exps = section_exponents(k);
    let d = exps.len();
    let [radial, angular] = spec.resolution();
    let plane = plane_rule(radial, angular);
    let tasks: Vec<(usize, usize)> = (0..3).flat_map(|v| (0..radial).map(move |r| (v, r))).collect();
    let rows: Vec<GridBuilder> = tasks
        .par_iter()
        .map(|&(v, row)| {
            let others: Vec<usize> = (0..3).filter(|&i| i != v).collect();
            let mut b = GridBuilder::new(d, 3 * angular);
            let mut z = vec![C64::new(0.0, 0.0); d];
            let mut z1 = z.clone();
            let mut z2 = z.clone();
            for n in &plane[row * angular..(row + 1) * angular] {
                let (patch, ia, ib, t, weight) = if n.u <= 1.0 {
                    (0u8, others[0], others[1], C64::from_polar(n.u.sqrt(), n.theta), n.weight)
                } else {
                    (1u8, others[1], others[0], C64::from_polar(1.0 / n.u.sqrt(), -n.theta), n.weight / (n.u * n.u))
                };
                let mut p = [C64::new(0.0, 0.0); 3];
                p[ia] = t;
                p[ib] = C64::new(1.0, 0.0);
                for y in cubic_roots(&form.slice(v, &p)) {
                    p[v] = y;
                    for _ in 0..2 {
                        let g = form.gradient(&p);
                        if g[v].norm() > 0.0 {
                            p[v] -= form.eval(&p) / g[v];
                        }
                    }
                    let g = form.gradient(&p);
                    let gmax = g.iter().fold(0.0_f64, |m, c| m.max(c.norm()));
                    let chi = (g[v].norm() / gmax).powi(2 * PARTITION_POWER)
                        / g.iter().map(|c| (c.norm() / gmax).powi(2 * PARTITION_POWER)).sum::<f64>();
                    if !(chi >= PARTITION_CUTOFF) {
                        continue;
                    }
                    let hess = form.hessian(&p);
                    let mut dp = [C64::new(0.0, 0.0); 3];
                    dp[ia] = C64::new(1.0, 0.0);
                    dp[v] = -g[ia] / g[v];
                    let mut quad = C64::new(0.0, 0.0);
                    for i in 0..3 {
                        for j in 0..3 {
                            quad += dp[i] * hess[i][j] * dp[j];
                        }
                    }
                    let mut ddp = [C64::new(0.0, 0.0); 3];
                    ddp[v] = -quad / g[v];
                    section_jets(&exps, &p, &dp, &ddp, &mut z, &mut z1, &mut z2);
                    b.push(2 * v as u8 + patch, t, weight * chi, &z, &z1, &z2);
                }
            }
            b
        })
        .collect();
    let mut out = GridBuilder::new(d, rows.iter().map(|r| r.weights.len()).sum());
    for r in rows {
        out.append(r);
    }
    Ok(out.finish(spec.clone()))
}

/// Values and first two derivatives of the monomials along a curve
/// `p(t)` with velocity `dp` and acceleration `ddp`.
fn section_jets(
    exps: &[[usize; 3]],
    p: &[C64; 3],
    dp: &[C64; 3],
    ddp: &[C64; 3],
    z: &mut [C64],
    z1: &mut [C64],
    z2: &mut [C64],
) {
    let kmax = exps.iter().map(|e| e[0] + e[1] + e[2]).max().unwrap_or(0);
    let pw: Vec<Vec<C64>> = (0..3)
        .map(|i| {
            let mut v = vec![C64::new(1.0, 0.0); kmax + 1];
            for j in 1..=kmax {
                v[j] = v[j - 1] * p[i];
            }
            v
        })
        .collect();
    let mono = |e: [isize; 3]| -> C64 {
        if e.iter().any(|&x| x < 0) {
            return C64::new(0.0, 0.0);
        }
        pw[0][e[0] as usize] * pw[1][e[1] as usize] * pw[2][e[2] as usize]
    };
    for (n, e) in exps.iter().enumerate() {
        let ei = [e[0] as isize, e[1] as isize, e[2] as isize];
        z[n] = mono(ei);
        let mut g = C64::new(0.0, 0.0);
        let mut gg = C64::new(0.0, 0.0);
        for i in 0..3 {
            if e[i] == 0 {
                continue;
            }
            let mut f = ei;
            f[i] -= 1;
            let gi = mono(f) * e[i] as f64;
            g += gi * dp[i];
            gg += gi * ddp[i];
            for j in 0..3 {
                let mut h = f;
                let fj = h[j];
                if fj <= 0 {
                    continue;
                }
                h[j] -= 1;
                gg += mono(h) * (e[i] as f64 * fj as f64) * dp[i] * dp[j];
            }
        }
        z1[n] = g;
        z2[n] = gg;
    }
}
