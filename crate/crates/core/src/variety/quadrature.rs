//! Tensor rules on the Riemann sphere.

use std::f64::consts::PI;

/// Gauss–Legendre nodes and weights on `[-1, 1]`, nodes ascending.
pub fn gauss_legendre(n: usize) -> (Vec<f64>, Vec<f64>) {
    let mut x = vec![0.0; n];
    let mut w = vec![0.0; n];
    for i in 0..n.div_ceil(2) {
        let mut z = (PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
        for _ in 0..100 {
            let (p, d) = legendre(n, z);
            let dz = p / d;
            z -= dz;
            if dz.abs() < 1e-16 {
                break;
            }
        }
        let dp = legendre(n, z).1;
        let wi = 2.0 / ((1.0 - z * z) * dp * dp);
        x[i] = -z;
        x[n - 1 - i] = z;
        w[i] = wi;
        w[n - 1 - i] = wi;
    }
    (x, w)
}

/// `(P_n(z), P_n'(z))` by the three-term recurrence.
fn legendre(n: usize, z: f64) -> (f64, f64) {
    let (mut p0, mut p1) = (1.0, z);
    if n == 0 {
        return (1.0, 0.0);
    }
    for j in 2..=n {
        let p2 = ((2 * j - 1) as f64 * z * p1 - (j - 1) as f64 * p0) / j as f64;
        p0 = p1;
        p1 = p2;
    }
    (p1, n as f64 * (z * p1 - p0) / (z * z - 1.0))
}

/// A point of the plane with its `dx dy` weight.
#[derive(Debug, Clone, Copy)]
pub struct PlaneNode {
    /// `|t|^2`.
    pub u: f64,
    /// Angle of `t`.
    pub theta: f64,
    pub weight: f64,
}

/// Product rule for `∫_C f dx dy`.
///
/// With `u = |t|^2 = s/(1-s)`, `dx dy = du dθ / 2` and `du = ds/(1-s)^2`.
/// Gauss–Legendre in `s ∈ (0,1)` times the midpoint rule in `θ`.
/// Nodes are ordered radially outward, angle fastest.
pub fn plane_rule(radial: usize, angular: usize) -> Vec<PlaneNode> {
    let (x, w) = gauss_legendre(radial);
    let mut out = Vec::with_capacity(radial * angular);
    for (xi, wi) in x.iter().zip(&w) {
        let s = 0.5 * (xi + 1.0);
        let ws = 0.5 * wi;
        let u = s / (1.0 - s);
        let weight = ws / (2.0 * (1.0 - s) * (1.0 - s)) * 2.0 * PI / angular as f64;
        for j in 0..angular {
            let theta = 2.0 * PI * (j as f64 + 0.5) / angular as f64;
            out.push(PlaneNode { u, theta, weight });
        }
    }
    out
}
