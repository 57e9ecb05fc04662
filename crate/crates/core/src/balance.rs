//! Iteration of `T = Hilb ∘ FS` towards a balanced metric.

use crate::duality::{density_rho_jets, hilb};
use crate::functionals::{i_functional, l_tilde, z_tilde};
use crate::hermitian::{map_distance, GramMetric, MatrixRecord};
use crate::metrics::{fs_metric, AlgebraicMetric};
use crate::sampling;
use crate::variety::QuadratureGrid;
use crate::{Error, Result};
use serde::{Deserialize, Serialize};
use std::time::Instant;

/// Condition number beyond which the iteration is declared diverged.
pub const MAX_CONDITION: f64 = 1e12;

/// Relative slack allowed for `Z̃` and for the half-step drops.
pub const MONOTONE_TOL: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Normalization {
    /// Rescale so that `Tr H = d`.
    TraceD,
    /// Rescale so that `det H = 1`.
    DetOne,
}

impl Normalization {
    pub fn apply(self, h: &GramMetric) -> GramMetric {
        match self {
            Normalization::TraceD => h.trace_normalized(),
            Normalization::DetOne => h.det_normalized(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct IterationConfig {
    pub max_iters: usize,
    pub tol_map_distance: f64,
    pub tol_rho_flatness: f64,
    pub trace_every: usize,
    pub normalize: Normalization,
    /// Fill the `ms` column with wall-clock times. Off by default so that
    /// traces are reproducible byte for byte.
    pub record_timing: bool,
}

impl Default for IterationConfig {
    fn default() -> Self {
        IterationConfig {
            max_iters: 500,
            tol_map_distance: 1e-10,
            tol_rho_flatness: 1e-8,
            trace_every: 1,
            normalize: Normalization::TraceD,
            record_timing: false,
        }
    }
}

impl IterationConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |field: &str| Err(Error::InvalidGeometry(format!("iteration.{field} is out of range")));
        if self.max_iters < 1 {
            return bad("max_iters");
        }
        if !(self.tol_map_distance > 0.0) {
            return bad("tol_map_distance");
        }
        if !(self.tol_rho_flatness > 0.0) {
            return bad("tol_rho_flatness");
        }
        if self.trace_every < 1 {
            return bad("trace_every");
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IterationStep {
    pub iter: usize,
    /// `Z̃(H_i)` relative to the reference metric.
    pub z_tilde: f64,
    /// `L̃(FS(H_i))`.
    pub l_tilde: f64,
    pub rho_flatness: f64,
    /// Distance between `H_i` and `T(H_i)`.
    pub map_distance: f64,
    /// `P̃(FS(H_i), H_i) - P̃(FS(H_i), T(H_i))`.
    pub hilb_drop: f64,
    /// `P̃(FS(H_i), T(H_i)) - P̃(FS(T(H_i)), T(H_i))`.
    pub fs_drop: f64,
    pub ms: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum IterationStatus {
    Converged,
    MaxIters,
    Diverged,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IterationTrace {
    pub steps: Vec<IterationStep>,
    pub status: IterationStatus,
    /// Number of applications of `T`.
    pub iterations: usize,
    /// Last accepted (gauge-normalized) iterate.
    #[serde(with = "gram_serde")]
    pub limit: GramMetric,
}

mod gram_serde {
    use super::*;
    use serde::{Deserializer, Serializer};

    pub fn serialize<S: Serializer>(h: &GramMetric, s: S) -> std::result::Result<S::Ok, S::Error> {
        MatrixRecord::from(h).serialize(s)
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> std::result::Result<GramMetric, D::Error> {
        MatrixRecord::deserialize(d)?.to_gram().map_err(serde::de::Error::custom)
    }
}

impl IterationTrace {
    pub const CSV_HEADER: &'static str = "iter,Z_tilde,L_tilde,rho_flatness,map_distance,ms";

    /// CSV rendering with full round-trip precision.
    pub fn to_csv(&self) -> String {
        let mut out = String::from(Self::CSV_HEADER);
        out.push('\n');
        for s in &self.steps {
            out.push_str(&format!(
                "{},{:.17e},{:.17e},{:.17e},{:.17e},{:.3}\n",
                s.iter, s.z_tilde, s.l_tilde, s.rho_flatness, s.map_distance, s.ms
            ));
        }
        out
    }

    pub fn last(&self) -> Option<&IterationStep> {
        self.steps.last()
    }
}

struct State {
    h: GramMetric,
    m: AlgebraicMetric,
    g: GramMetric,
    i_ref: f64,
}

impl State {
    fn new(h: GramMetric, h_ref: &AlgebraicMetric, grid: &QuadratureGrid) -> Result<Self> {
        let m = fs_metric(&h, grid)?;
        let g = hilb(&m, grid)?;
        let i_ref = i_functional(&m, h_ref, grid)?;
        Ok(State { h, m, g, i_ref })
    }
}

/// Iterates `H <- normalize(Hilb(FS(H)))` from `h0`.
///
/// Fails with [`Error::Monotonicity`] if `Z̃` increases or either half-step
/// drop is negative beyond tolerance.
pub fn run_iteration(h0: &GramMetric, grid: &QuadratureGrid, cfg: &IterationConfig) -> Result<IterationTrace> {
    cfg.validate()?;
    let d = grid.dim() as f64;
    let v = grid.volume();
    let h_ref = fs_metric(&GramMetric::identity(grid.dim()), grid)?;
    let mut cur = State::new(cfg.normalize.apply(h0), &h_ref, grid)?;
    let mut steps = Vec::new();
    let mut status = IterationStatus::MaxIters;
    let mut iterations = 0;
    let mut prev_z: Option<f64> = None;
    for iter in 0..cfg.max_iters {
        let start = Instant::now();
        if cur.h.condition_number() > MAX_CONDITION {
            status = IterationStatus::Diverged;
            break;
        }
        let z_t = -cur.i_ref + v / d * cur.h.log_det();
        let l_t = cur.g.log_det() - d / v * cur.i_ref;
        if let Some(pz) = prev_z {
            if z_t > pz + MONOTONE_TOL * pz.abs().max(v) {
                return Err(Error::Monotonicity { iter, before: pz, after: z_t });
            }
        }
        prev_z = Some(z_t);
        let rho = density_rho_jets(&cur.m, grid, &cur.g)?.f;
        let target = d / v;
        let rho_flatness = rho.iter().fold(0.0_f64, |a, r| a.max((r - target).abs())) / target;
        let dist = map_distance(&cur.h, &cur.g);
        let converged = dist < cfg.tol_map_distance && rho_flatness < cfg.tol_rho_flatness;

        let next = State::new(cfg.normalize.apply(&cur.g), &h_ref, grid)?;
        let tr = |a: &GramMetric, b: &GramMetric| (a.entries() * b.inverse()).trace().re;
        let hilb_drop = (tr(&cur.g, &cur.h) / d).ln() + (cur.h.log_det() - cur.g.log_det()) / d;
        let i_cross = i_functional(&cur.m, &next.m, grid)?;
        let fs_drop = tr(&cur.g, &next.h).ln() - tr(&next.g, &next.h).ln() - i_cross / v;
        for (name, drop) in [("hilb", hilb_drop), ("fs", fs_drop)] {
            if drop < -MONOTONE_TOL * (1.0 + drop.abs()) {
                return Err(Error::HalfStep { iter, which: name.to_string(), drop });
            }
        }
        let ms = if cfg.record_timing { start.elapsed().as_secs_f64() * 1e3 } else { 0.0 };
        let step = IterationStep {
            iter,
            z_tilde: z_t,
            l_tilde: l_t,
            rho_flatness,
            map_distance: dist,
            hilb_drop,
            fs_drop,
            ms,
        };
        if converged {
            steps.push(step);
            status = IterationStatus::Converged;
            break;
        }
        if iter % cfg.trace_every == 0 || iter + 1 == cfg.max_iters {
            steps.push(step);
        }
        cur = next;
        iterations += 1;
    }
    Ok(IterationTrace { steps, status, iterations, limit: cur.h })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MinimumViolation {
    pub sample: usize,
    pub epsilon: f64,
    pub l_tilde_gap: f64,
    pub z_tilde_gap: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MinimumReport {
    pub samples: usize,
    /// `min L̃(FS(H)) - L̃(FS(H*))` over samples.
    pub min_l_tilde_gap: f64,
    /// `min Z̃(H) - Z̃(H*)` over samples.
    pub min_z_tilde_gap: f64,
    pub violations: Vec<MinimumViolation>,
}

/// Samples metrics around `h_star` with `ε` cycling through `epsilons`
/// and checks that `L̃` and `Z̃` do not drop below their values at `h_star`.
pub fn verify_minimum_with(
    h_star: &GramMetric,
    grid: &QuadratureGrid,
    n_samples: usize,
    seed: u64,
    epsilons: &[f64],
) -> Result<MinimumReport> {
    let h_ref = fs_metric(&GramMetric::identity(grid.dim()), grid)?;
    let l_star = l_tilde(&fs_metric(h_star, grid)?, &h_ref, grid)?;
    let z_star = z_tilde(h_star, &h_ref, grid)?;
    let mut rng = sampling::rng(seed);
    let mut report = MinimumReport {
        samples: n_samples,
        min_l_tilde_gap: f64::INFINITY,
        min_z_tilde_gap: f64::INFINITY,
        violations: Vec::new(),
    };
    for sample in 0..n_samples {
        let epsilon = epsilons[sample % epsilons.len()];
        let h = sampling::perturb(h_star, epsilon, &mut rng);
        let l_gap = l_tilde(&fs_metric(&h, grid)?, &h_ref, grid)? - l_star;
        let z_gap = z_tilde(&h, &h_ref, grid)? - z_star;
        report.min_l_tilde_gap = report.min_l_tilde_gap.min(l_gap);
        report.min_z_tilde_gap = report.min_z_tilde_gap.min(z_gap);
        if l_gap < -1e-9 || z_gap < -1e-9 {
            report.violations.push(MinimumViolation { sample, epsilon, l_tilde_gap: l_gap, z_tilde_gap: z_gap });
        }
    }
    Ok(report)
}

pub fn verify_minimum(
    h_star: &GramMetric,
    grid: &QuadratureGrid,
    n_samples: usize,
    seed: u64,
) -> Result<MinimumReport> {
    verify_minimum_with(h_star, grid, n_samples, seed, &sampling::EPSILONS)
}
