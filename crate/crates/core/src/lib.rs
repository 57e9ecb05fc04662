//! Balanced metrics on polarized projective curves.
//!
//! The crate realizes the finite-dimensional picture of a polarized curve
//! `(X, L^k)`: Hermitian metrics `H` on the section space `E`, algebraic fiber
//! metrics `e^c FS(H)`, the maps `Hilb` and `FS` between them, the functionals
//! `I`, `L`, `Z`, `P` with their scale-invariant variants, the Mabuchi
//! functional, and the iteration `H -> Hilb(FS(H))` whose fixed points are
//! balanced metrics.
//!
//! Two geometries are supported: the projective line with `O(k)` and a smooth
//! plane cubic with `O(k)` restricted from the plane.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod asymptotics;
pub mod balance;
pub mod duality;
pub mod error;
pub mod functionals;
pub mod hermitian;
pub mod metrics;
pub mod reduce;
pub mod sampling;
pub mod variety;

pub use error::{Error, Result};

/// Complex scalar used throughout.
pub type C64 = num_complex::Complex64;
/// Dense complex matrix.
pub type CMat = nalgebra::DMatrix<C64>;
/// Dense complex column vector.
pub type CVec = nalgebra::DVector<C64>;

/// Version of this crate, recorded in run manifests.
pub const VERSION: &str = env!("CARGO_PKG_VERSION");
