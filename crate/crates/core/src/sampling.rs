//! Seeded sampling of metrics near a base point of `M`.
//!
//! A sample is `H = L exp(εA) L^†` where `base = L L^†` and `A` is a Hermitian
//! Gaussian matrix scaled so that its spectrum is roughly `[-1, 1]`.

use crate::hermitian::{Geodesic, GramMetric};
use crate::{CMat, C64};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

/// Perturbation sizes spanning near-balanced to strongly non-balanced metrics.
pub const EPSILONS: [f64; 3] = [0.1, 0.5, 1.0];

pub type SampleRng = ChaCha8Rng;

pub fn rng(seed: u64) -> SampleRng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Hermitian matrix with Gaussian entries and spectrum of order one.
pub fn hermitian_gaussian(d: usize, rng: &mut SampleRng) -> CMat {
    let g = CMat::from_fn(d, d, |_, _| {
        let re: f64 = StandardNormal.sample(rng);
        let im: f64 = StandardNormal.sample(rng);
        C64::new(re, im) * std::f64::consts::FRAC_1_SQRT_2
    });
    let scale = 1.0 / (std::f64::consts::SQRT_2 * 2.0 * (d as f64).sqrt());
    (&g + g.adjoint()) * C64::new(scale, 0.0)
}

/// `L exp(εA) L^†` for a fresh Gaussian `A`.
pub fn perturb(base: &GramMetric, eps: f64, rng: &mut SampleRng) -> GramMetric {
    let a = hermitian_gaussian(base.dim(), rng);
    Geodesic::from_generator(base, &a).expect("generator has the base dimension").value(eps)
}

/// A perturbed Gram matrix together with a Gaussian log-scale.
pub fn perturb_scaled(base: &GramMetric, eps: f64, rng: &mut SampleRng) -> (GramMetric, f64) {
    let h = perturb(base, eps, rng);
    let c: f64 = StandardNormal.sample(rng);
    (h, c)
}

/// `ε` used for the `i`-th sample of a suite.
pub fn epsilon_for(i: usize) -> f64 {
    EPSILONS[i % EPSILONS.len()]
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::hermitian::asymmetry;

    #[test]
    fn spectrum_is_order_one() {
        let mut r = rng(1);
        for d in [2, 5, 9, 17] {
            let a = hermitian_gaussian(d, &mut r);
            assert_eq!(asymmetry(&a), 0.0);
            let ev = crate::hermitian::hermitian_eigen(&a).0;
            assert!(ev[0] > -2.0 && ev[d - 1] < 2.0);
        }
    }

    #[test]
    fn seeded_samples_repeat() {
        let base = GramMetric::identity(4);
        let a = perturb(&base, 0.5, &mut rng(9));
        let b = perturb(&base, 0.5, &mut rng(9));
        assert_eq!(a, b);
        assert_eq!(perturb(&base, 0.0, &mut rng(3)).entries(), base.entries());
    }
}
