//! The space `M` of Hermitian inner products on the section space.
//!
//! A [`GramMetric`] is stored as the Gram matrix of the reference basis of `E`,
//! with entries `H_ij = <s_i, s_j>` (conjugate-linear in the first slot).
//! Determinants are taken relative to that basis.

use crate::{CMat, Error, Result, C64};
use nalgebra::{Cholesky, DVector, SymmetricEigen};
use serde::{Deserialize, Serialize};

/// Relative asymmetry accepted when constructing a [`GramMetric`].
pub const HERMITIAN_TOL: f64 = 1e-12;

/// Returns `(m + m^†) / 2`.
pub fn hermitize(m: &CMat) -> CMat {
    (m + m.adjoint()) * C64::new(0.5, 0.0)
}

/// Relative distance of `m` from its adjoint in the max norm.
pub fn asymmetry(m: &CMat) -> f64 {
    let scale = m.iter().fold(0.0_f64, |a, z| a.max(z.norm()));
    if scale == 0.0 {
        return 0.0;
    }
    (m - m.adjoint()).iter().fold(0.0_f64, |a, z| a.max(z.norm())) / scale
}

/// Eigen-decomposition of a Hermitian matrix, eigenvalues ascending.
pub fn hermitian_eigen(m: &CMat) -> (Vec<f64>, CMat) {
    let eig = SymmetricEigen::new(hermitize(m));
    let n = m.nrows();
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[a].total_cmp(&eig.eigenvalues[b]));
    let values = order.iter().map(|&i| eig.eigenvalues[i]).collect();
    let vectors = CMat::from_fn(n, n, |r, c| eig.eigenvectors[(r, order[c])]);
    (values, vectors)
}

/// `exp(a)` for Hermitian `a`.
pub fn exp_hermitian(a: &CMat) -> CMat {
    let (vals, u) = hermitian_eigen(a);
    let scaled = CMat::from_fn(u.nrows(), u.ncols(), |r, c| u[(r, c)] * vals[c].exp());
    hermitize(&(scaled * u.adjoint()))
}

/// Cholesky factorization that also fails on indefinite input. For complex
/// matrices nalgebra takes complex square roots of negative pivots instead
/// of failing, which shows up as a diagonal entry of `L` that is not
/// essentially real and positive.
fn pd_cholesky(m: CMat) -> Option<Cholesky<C64, nalgebra::Dyn>> {
    let chol = Cholesky::new(m)?;
    let l = chol.l_dirty();
    let ok = (0..l.nrows()).all(|i| {
        let p = l[(i, i)];
        p.re > 0.0 && p.re.is_finite() && p.im.abs() <= 1e-8 * p.re
    });
    ok.then_some(chol)
}

/// A Hermitian positive-definite Gram matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct GramMetric {
    entries: CMat,
}

impl GramMetric {
    /// Validates and symmetrizes `entries`.
    pub fn new(entries: CMat) -> Result<Self> {
        if entries.nrows() != entries.ncols() {
            return Err(Error::DimensionMismatch { expected: entries.nrows(), got: entries.ncols() });
        }
        if entries.nrows() == 0 {
            return Err(Error::DimensionMismatch { expected: 1, got: 0 });
        }
        if entries.iter().any(|z| !z.re.is_finite() || !z.im.is_finite()) {
            return Err(Error::NotPositiveDefinite);
        }
        let asym = asymmetry(&entries);
        if asym > HERMITIAN_TOL {
            return Err(Error::NotHermitian(asym));
        }
        let entries = hermitize(&entries);
        if pd_cholesky(entries.clone()).is_none() {
            return Err(Error::NotPositiveDefinite);
        }
        Ok(GramMetric { entries })
    }

    /// Symmetrizes without the positivity check. Callers guarantee positivity.
    pub(crate) fn from_trusted(entries: CMat) -> Self {
        GramMetric { entries: hermitize(&entries) }
    }

    pub fn identity(d: usize) -> Self {
        GramMetric { entries: CMat::identity(d, d) }
    }

    pub fn from_diagonal(diag: &[f64]) -> Result<Self> {
        if diag.iter().any(|&x| !(x > 0.0) || !x.is_finite()) {
            return Err(Error::NotPositiveDefinite);
        }
        let v = DVector::from_iterator(diag.len(), diag.iter().map(|&x| C64::new(x, 0.0)));
        Ok(GramMetric { entries: CMat::from_diagonal(&v) })
    }

    pub fn dim(&self) -> usize {
        self.entries.nrows()
    }

    pub fn entries(&self) -> &CMat {
        &self.entries
    }

    pub fn into_entries(self) -> CMat {
        self.entries
    }

    /// Lower-triangular `L` with `H = L L^†`.
    pub fn cholesky_factor(&self) -> CMat {
        Cholesky::new(self.entries.clone()).expect("GramMetric is positive definite").l()
    }

    /// `H^{-1}`.
    pub fn inverse(&self) -> CMat {
        let inv = Cholesky::new(self.entries.clone()).expect("GramMetric is positive definite").inverse();
        hermitize(&inv)
    }

    /// Columns form an `H`-orthonormal basis: `A^† H A = I`, `A = L^{-†}`.
    pub fn orthonormal_frame(&self) -> CMat {
        let l = self.cholesky_factor();
        let d = self.dim();
        let linv = l.solve_lower_triangular(&CMat::identity(d, d)).expect("Cholesky factor is invertible");
        linv.adjoint()
    }

    /// `e^alpha H`.
    pub fn scaled(&self, alpha: f64) -> Self {
        GramMetric { entries: &self.entries * C64::new(alpha.exp(), 0.0) }
    }

    pub fn trace(&self) -> f64 {
        self.entries.diagonal().iter().map(|z| z.re).sum()
    }

    pub fn log_det(&self) -> f64 {
        log_det_entries(&self.entries).expect("GramMetric is positive definite")
    }

    /// Rescaled so that `Tr H = d`.
    pub fn trace_normalized(&self) -> Self {
        let d = self.dim() as f64;
        self.scaled((d / self.trace()).ln())
    }

    /// Rescaled so that `det H = 1`.
    pub fn det_normalized(&self) -> Self {
        self.scaled(-self.log_det() / self.dim() as f64)
    }

    pub fn eigenvalues(&self) -> Vec<f64> {
        hermitian_eigen(&self.entries).0
    }

    pub fn condition_number(&self) -> f64 {
        let ev = self.eigenvalues();
        ev[ev.len() - 1] / ev[0]
    }
}

/// Row-major serialized form `{dim, entries_re, entries_im}`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MatrixRecord {
    pub dim: usize,
    pub entries_re: Vec<f64>,
    pub entries_im: Vec<f64>,
}

impl MatrixRecord {
    pub fn from_matrix(m: &CMat) -> Self {
        let n = m.nrows();
        let mut entries_re = Vec::with_capacity(n * n);
        let mut entries_im = Vec::with_capacity(n * n);
        for r in 0..n {
            for c in 0..n {
                entries_re.push(m[(r, c)].re);
                entries_im.push(m[(r, c)].im);
            }
        }
        MatrixRecord { dim: n, entries_re, entries_im }
    }

    pub fn to_matrix(&self) -> Result<CMat> {
        let n = self.dim;
        for len in [self.entries_re.len(), self.entries_im.len()] {
            if len != n * n {
                return Err(Error::DimensionMismatch { expected: n * n, got: len });
            }
        }
        Ok(CMat::from_fn(n, n, |r, c| C64::new(self.entries_re[r * n + c], self.entries_im[r * n + c])))
    }

    /// Validates as a [`GramMetric`] without altering any entry.
    pub fn to_gram(&self) -> Result<GramMetric> {
        let m = self.to_matrix()?;
        GramMetric::new(m.clone())?;
        Ok(GramMetric { entries: m })
    }
}

impl From<&GramMetric> for MatrixRecord {
    fn from(h: &GramMetric) -> Self {
        MatrixRecord::from_matrix(h.entries())
    }
}

fn log_det_entries(m: &CMat) -> Result<f64> {
    let chol = pd_cholesky(hermitize(m)).ok_or(Error::NotPositiveDefinite)?;
    let l = chol.l_dirty();
    Ok((0..m.nrows()).map(|i| 2.0 * l[(i, i)].re.ln()).sum())
}

/// `log det H` relative to the reference basis.
pub fn log_det(h: &GramMetric) -> f64 {
    h.log_det()
}

/// `log det` of a raw matrix, failing unless it is Hermitian positive-definite.
pub fn log_det_checked(m: &CMat) -> Result<f64> {
    if m.nrows() != m.ncols() {
        return Err(Error::DimensionMismatch { expected: m.nrows(), got: m.ncols() });
    }
    if asymmetry(m) > HERMITIAN_TOL {
        return Err(Error::NotHermitian(asymmetry(m)));
    }
    log_det_entries(m)
}

/// Eigenvalues of the pencil `(a, b)`, i.e. of `a^{-1} b`, ascending.
pub fn pencil_eigenvalues(a: &GramMetric, b: &GramMetric) -> Vec<f64> {
    let l = a.cholesky_factor();
    let m = whiten(&l, b.entries());
    hermitian_eigen(&m).0
}

/// `L^{-1} b L^{-†}`.
fn whiten(l: &CMat, b: &CMat) -> CMat {
    let x = l.solve_lower_triangular(b).expect("Cholesky factor is invertible");
    let y = l.solve_lower_triangular(&x.adjoint()).expect("Cholesky factor is invertible");
    hermitize(&y)
}

/// Scale-invariant distance: `max |log λ|` over the pencil of the
/// trace-normalized pair.
pub fn map_distance(a: &GramMetric, b: &GramMetric) -> f64 {
    let ratio = a.trace() / b.trace();
    pencil_eigenvalues(a, b).into_iter().map(|l| (l * ratio).ln().abs()).fold(0.0, f64::max)
}

/// `Tr(Q)/d - (det Q)^{1/d}`, nonnegative by the AM-GM inequality.
pub fn det_trace_inequality_gap(q: &GramMetric) -> f64 {
    let d = q.dim() as f64;
    q.trace() / d - (q.log_det() / d).exp()
}

/// One-parameter subgroup through `base`: in the `base`-orthonormal `frame`
/// the metric at time `t` is `diag(e^{rates t})`.
#[derive(Debug, Clone)]
pub struct Geodesic {
    base: GramMetric,
    frame: CMat,
    rates: Vec<f64>,
    lifted: CMat,
}

impl Geodesic {
    fn from_frame(base: GramMetric, frame: CMat, rates: Vec<f64>) -> Self {
        let lifted = base.entries() * &frame;
        Geodesic { base, frame, rates, lifted }
    }

    /// Geodesic `t -> L exp(t A) L^†` where `base = L L^†` and `a` is Hermitian.
    pub fn from_generator(base: &GramMetric, a: &CMat) -> Result<Self> {
        if a.nrows() != base.dim() || a.ncols() != base.dim() {
            return Err(Error::DimensionMismatch { expected: base.dim(), got: a.nrows() });
        }
        let (rates, u) = hermitian_eigen(a);
        let frame = base.orthonormal_frame() * u;
        Ok(Self::from_frame(base.clone(), frame, rates))
    }

    pub fn base(&self) -> &GramMetric {
        &self.base
    }

    pub fn frame(&self) -> &CMat {
        &self.frame
    }

    pub fn rates(&self) -> &[f64] {
        &self.rates
    }

    /// The metric at parameter `t`.
    /// `H_t`; exactly the base at `t = 0`.
    pub fn value(&self, t: f64) -> GramMetric {
        if t == 0.0 {
            return self.base.clone();
        }
        let m = &self.lifted;
        let scaled = CMat::from_fn(m.nrows(), m.ncols(), |r, c| m[(r, c)] * (self.rates[c] * t).exp());
        GramMetric::from_trusted(scaled * m.adjoint())
    }
}

/// The geodesic with `value(0) = h0` and `value(1) = h1`.
pub fn geodesic_between(h0: &GramMetric, h1: &GramMetric) -> Result<Geodesic> {
    if h0.dim() != h1.dim() {
        return Err(Error::DimensionMismatch { expected: h0.dim(), got: h1.dim() });
    }
    let l = h0.cholesky_factor();
    let (vals, u) = hermitian_eigen(&whiten(&l, h1.entries()));
    let rates = vals.iter().map(|v| v.ln()).collect();
    let frame = h0.orthonormal_frame() * u;
    Ok(Geodesic::from_frame(h0.clone(), frame, rates))
}

pub fn geodesic_value(g: &Geodesic, t: f64) -> GramMetric {
    g.value(t)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn max_abs(m: &CMat) -> f64 {
        m.iter().fold(0.0_f64, |a, z| a.max(z.norm()))
    }

    fn random_pd(d: usize, rng: &mut ChaCha8Rng) -> GramMetric {
        let g = CMat::from_fn(d, d, |_, _| C64::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0)));
        GramMetric::new(&g * g.adjoint() + CMat::identity(d, d) * C64::new(0.1, 0.0)).unwrap()
    }

    #[test]
    fn log_det_examples() {
        assert_eq!(GramMetric::identity(3).log_det(), 0.0);
        let h = GramMetric::from_diagonal(&[1.0, 2.0]).unwrap();
        assert!((h.log_det() - 2f64.ln()).abs() < 1e-15);
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let h = random_pd(5, &mut rng);
        assert!((h.scaled(0.7).log_det() - h.log_det() - 0.7 * 5.0).abs() < 1e-12);
    }

    #[test]
    fn rejects_bad_input() {
        let m = CMat::from_row_slice(
            2,
            2,
            &[C64::new(1.0, 0.0), C64::new(2.0, 0.0), C64::new(2.0, 0.0), C64::new(1.0, 0.0)],
        );
        assert_eq!(GramMetric::new(m.clone()), Err(Error::NotPositiveDefinite));
        assert!(log_det_checked(&m).is_err());
        let mut n = CMat::identity(2, 2);
        n[(0, 1)] = C64::new(0.0, 0.5);
        assert!(matches!(GramMetric::new(n), Err(Error::NotHermitian(_))));
    }

    #[test]
    fn constant_and_scalar_geodesics() {
        let g = geodesic_between(&GramMetric::identity(3), &GramMetric::identity(3)).unwrap();
        assert!(g.rates().iter().all(|r| r.abs() < 1e-15));
        let e = std::f64::consts::E;
        let g = geodesic_between(&GramMetric::identity(2), &GramMetric::from_diagonal(&[e, e]).unwrap()).unwrap();
        assert!(g.rates().iter().all(|r| (r - 1.0).abs() < 1e-14));
        let mid = g.value(0.5);
        assert!((mid.entries() - CMat::identity(2, 2) * C64::new(e.sqrt(), 0.0)).norm() < 1e-14);
    }

    #[test]
    fn one_parameter_subgroup_midpoint() {
        let h1 = GramMetric::from_diagonal(&[1.0, 4.0]).unwrap();
        let g = geodesic_between(&GramMetric::identity(2), &h1).unwrap();
        let mid = g.value(0.5);
        let want = GramMetric::from_diagonal(&[1.0, 2.0]).unwrap();
        assert!(max_abs(&(mid.entries() - want.entries())) < 1e-14);
    }

    #[test]
    fn explicit_exponential() {
        let a = CMat::from_diagonal(&DVector::from_vec(vec![C64::new(1.0, 0.0), C64::new(-1.0, 0.0)]));
        let g = Geodesic::from_generator(&GramMetric::identity(2), &a).unwrap();
        let e = std::f64::consts::E;
        let want = GramMetric::from_diagonal(&[e, 1.0 / e]).unwrap();
        assert!(max_abs(&(g.value(1.0).entries() - want.entries())) < 1e-14);
        assert_eq!(g.value(0.0).entries(), g.base().entries());
    }

    #[test]
    fn frame_is_orthonormal() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let h0 = random_pd(6, &mut rng);
        let h1 = random_pd(6, &mut rng);
        let g = geodesic_between(&h0, &h1).unwrap();
        let gram = g.frame().adjoint() * h0.entries() * g.frame();
        assert!(max_abs(&(gram - CMat::identity(6, 6))) < 1e-12);
    }

    #[test]
    fn amgm_examples() {
        assert!(det_trace_inequality_gap(&GramMetric::identity(4)).abs() < 1e-15);
        let q = GramMetric::from_diagonal(&[1.0, 4.0]).unwrap();
        assert!((det_trace_inequality_gap(&q) - 0.5).abs() < 1e-14);
    }

    #[test]
    fn amgm_on_random_matrices() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        for i in 0..100 {
            let q = random_pd(2 + i % 11, &mut rng);
            assert!(det_trace_inequality_gap(&q) >= -1e-14 * q.trace() / q.dim() as f64);
        }
    }

    #[test]
    fn map_distance_is_scale_free() {
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        let a = random_pd(4, &mut rng);
        assert!(map_distance(&a, &a.scaled(1.3)) < 1e-13);
        let b = GramMetric::from_diagonal(&[1.0, 4.0]).unwrap();
        let expect = (1.6f64).ln().abs().max((0.4f64).ln().abs());
        assert!((map_distance(&GramMetric::identity(2), &b) - expect).abs() < 1e-14);
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(48))]

        #[test]
        fn geodesic_invariants(seed in 0u64..10_000, d in 2usize..9, t in -1.5f64..2.5) {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let h0 = random_pd(d, &mut rng);
            let h1 = random_pd(d, &mut rng);
            let g = geodesic_between(&h0, &h1).unwrap();
            let scale0 = max_abs(h0.entries());
            let scale1 = max_abs(h1.entries());
            prop_assert!(max_abs(&(g.value(0.0).entries() - h0.entries())) < 1e-10 * scale0);
            prop_assert!(max_abs(&(g.value(1.0).entries() - h1.entries())) < 1e-10 * scale1);
            let ht = g.value(t);
            prop_assert!(GramMetric::new(ht.entries().clone()).is_ok());
            let affine = h0.log_det() + t * g.rates().iter().sum::<f64>();
            prop_assert!((ht.log_det() - affine).abs() < 1e-10 * (1.0 + affine.abs()));
        }
    }
}
