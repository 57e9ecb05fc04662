use crate::config::{Format, InitialKind, Job, RunConfig};
use crate::error::CliError;
use crate::matrix_io;
use balmet_core::asymptotics::{bergman_residual, is_non_increasing, AsymptoticSweep, FixedClassMetric};
use balmet_core::balance::{run_iteration, IterationStatus, IterationTrace};
use balmet_core::duality::balanced_residual;
use balmet_core::functionals::{fs_gap, functional_report, hilb_gap, i_functional, z_along_geodesic};
use balmet_core::hermitian::{Geodesic, GramMetric, MatrixRecord};
use balmet_core::metrics::{fs_metric, AlgebraicMetric};
use balmet_core::sampling::{self, epsilon_for, hermitian_gaussian, perturb, perturb_scaled};
use balmet_core::variety::{build_geometry, projective_line::binomial, GeometryKind, QuadratureGrid};
use balmet_core::C64;
use rayon::prelude::*;
use serde::Serialize;
use serde_json::{json, Value};
use std::path::Path;

/// Everything a job produces before it is written to disk.
pub struct JobOutput {
    pub columns: Vec<&'static str>,
    pub trace_json: Value,
    pub trace_csv: String,
    pub result: Value,
    /// Additional files written next to the report.
    pub extra: Vec<(&'static str, String)>,
    /// Numerical failure detected after the outputs were assembled.
    pub failure: Option<CliError>,
}

fn numerics(e: balmet_core::Error) -> CliError {
    CliError::from_core("numerics", e)
}

fn csv(columns: &[&str], rows: impl Iterator<Item = Vec<String>>) -> String {
    let mut out = columns.join(",");
    out.push('\n');
    for r in rows {
        out.push_str(&r.join(","));
        out.push('\n');
    }
    out
}

fn f(x: f64) -> String {
    format!("{x:.17e}")
}

pub fn round_gram(k: usize) -> GramMetric {
    let diag: Vec<f64> = (0..=k).map(|j| 1.0 / binomial(k, j)).collect();
    GramMetric::from_diagonal(&diag).expect("positive diagonal")
}

pub fn initial_gram(cfg: &RunConfig, grid: &QuadratureGrid, identity: GramMetric) -> Result<GramMetric, CliError> {
    let init = &cfg.initial_metric;
    let base = || match grid.kind() {
        GeometryKind::ProjectiveLine => round_gram(grid.k()),
        GeometryKind::PlaneCubic => identity.clone(),
    };
    Ok(match init.kind {
        InitialKind::Identity => identity.clone(),
        InitialKind::RoundBalanced => round_gram(grid.k()),
        InitialKind::File => {
            let h = matrix_io::read_gram(init.path.as_deref().expect("validated"))?;
            if h.dim() != grid.dim() {
                return Err(CliError::validation(
                    "initial_metric.path",
                    format!("matrix has dimension {}, sections have dimension {}", h.dim(), grid.dim()),
                ));
            }
            h
        }
        InitialKind::Perturbed => perturb(&base(), init.epsilon.unwrap_or(0.5), &mut sampling::rng(cfg.seed)),
    })
}

/// Builds the geometry, runs the configured job and writes the outputs.
pub fn run(cfg: &RunConfig) -> Result<(), CliError> {
    let (grid, identity) = build_geometry(&cfg.geometry).map_err(|e| CliError::from_core("geometry", e))?;
    let self_test = grid.self_test().map_err(|e| CliError::from_core("geometry", e))?;
    let h0 = initial_gram(cfg, &grid, identity)?;
    let out = match cfg.job {
        Job::Balance => balance(cfg, &grid, &h0)?,
        Job::Functionals => functionals(cfg, &grid, &h0)?,
        Job::Convexity => convexity(cfg, &grid, &h0)?,
        Job::Bergman => bergman(cfg)?,
        Job::MabuchiSweep => mabuchi_sweep(cfg)?,
    };
    let dir = &cfg.output_dir;
    std::fs::create_dir_all(dir).map_err(|e| CliError::validation("output_dir", e.to_string()))?;
    if cfg.formats.contains(&Format::Json) {
        write(&dir.join("trace.json"), &pretty(&out.trace_json))?;
    }
    if cfg.formats.contains(&Format::Csv) {
        write(&dir.join("trace.csv"), &out.trace_csv)?;
    }
    for (name, text) in &out.extra {
        write(&dir.join(name), text)?;
    }
    let report = json!({
        "manifest": {
            "config": cfg,
            "versions": { "balmet": env!("CARGO_PKG_VERSION"), "balmet_core": balmet_core::VERSION },
            "grid_self_test": self_test,
            "csv_columns": out.columns,
        },
        "result": out.result,
    });
    write(&dir.join("report.json"), &pretty(&report))?;
    match out.failure {
        Some(e) => Err(e),
        None => Ok(()),
    }
}

fn pretty(v: &Value) -> String {
    serde_json::to_string_pretty(v).expect("value serializes")
}

fn write(path: &Path, text: &str) -> Result<(), CliError> {
    std::fs::write(path, text).map_err(|e| CliError::Io(format!("cannot write {}: {e}", path.display())))
}

fn reference(grid: &QuadratureGrid) -> Result<AlgebraicMetric, CliError> {
    fs_metric(&GramMetric::identity(grid.dim()), grid).map_err(numerics)
}

fn balance(cfg: &RunConfig, grid: &QuadratureGrid, h0: &GramMetric) -> Result<JobOutput, CliError> {
    let trace = run_iteration(h0, grid, &cfg.iteration).map_err(numerics)?;
    let columns: Vec<&str> = IterationTrace::CSV_HEADER.split(',').collect();
    let mut result = json!({
        "status": trace.status,
        "iterations": trace.iterations,
        "limit": MatrixRecord::from(&trace.limit),
    });
    let failure = if trace.status == IterationStatus::Diverged {
        Some(CliError::Numerical(format!("iteration diverged after {} steps", trace.iterations)))
    } else {
        let residual = balanced_residual(&trace.limit, grid).map_err(numerics)?;
        let m = fs_metric(&trace.limit, grid).map_err(numerics)?;
        let rep = functional_report(&m, &trace.limit, &reference(grid)?, "identity", grid, cfg.mabuchi_steps)
            .map_err(numerics)?;
        result["balanced_residual"] = json!(residual);
        result["functionals"] = json!(rep);
        None
    };
    let limit = matrix_io::to_json(&trace.limit);
    Ok(JobOutput {
        columns,
        trace_json: serde_json::to_value(&trace).expect("trace serializes"),
        trace_csv: trace.to_csv(),
        result,
        extra: vec![("limit.json", limit)],
        failure,
    })
}

#[derive(Serialize)]
struct FunctionalRow {
    sample: usize,
    epsilon: f64,
    i_rel: f64,
    l_tilde: f64,
    z_tilde: f64,
    p_tilde: f64,
    mabuchi_rel: f64,
    i_sandwich_gap: f64,
    fs_gap: f64,
    hilb_gap: f64,
}

fn functionals(cfg: &RunConfig, grid: &QuadratureGrid, h0: &GramMetric) -> Result<JobOutput, CliError> {
    let h_ref = reference(grid)?;
    let mut rng = sampling::rng(cfg.seed);
    let inputs: Vec<_> = (0..cfg.samples)
        .map(|s| {
            let (h, c) = perturb_scaled(h0, epsilon_for(s), &mut rng);
            let gram = perturb(h0, epsilon_for(s + 1), &mut rng);
            (s, h, c, gram)
        })
        .collect();
    let rows = inputs
        .par_iter()
        .map(|(s, h, c, gram)| -> balmet_core::Result<FunctionalRow> {
            let m = AlgebraicMetric::new(h, *c, grid)?;
            let rep = functional_report(&m, gram, &h_ref, "identity", grid, cfg.mabuchi_steps)?;
            let phi = m.potential(&h_ref)?;
            let lower = h_ref.integrate(grid, |i| phi[i]);
            let upper = m.integrate(grid, |i| phi[i]);
            let i = i_functional(&m, &h_ref, grid)?;
            Ok(FunctionalRow {
                sample: *s,
                epsilon: epsilon_for(*s),
                i_rel: rep.i_rel,
                l_tilde: rep.l_tilde,
                z_tilde: rep.z_tilde,
                p_tilde: rep.p_tilde,
                mabuchi_rel: rep.mabuchi_rel,
                i_sandwich_gap: (i - lower).min(upper - i),
                fs_gap: fs_gap(&m, gram, grid)?,
                hilb_gap: hilb_gap(&m, gram, grid)?,
            })
        })
        .collect::<balmet_core::Result<Vec<_>>>()
        .map_err(numerics)?;
    let base = fs_metric(h0, grid).map_err(numerics)?;
    let base_report = functional_report(&base, h0, &h_ref, "identity", grid, cfg.mabuchi_steps).map_err(numerics)?;
    let min = |g: fn(&FunctionalRow) -> f64| rows.iter().map(g).fold(f64::INFINITY, f64::min);
    let columns = vec![
        "sample",
        "epsilon",
        "i_rel",
        "l_tilde",
        "z_tilde",
        "p_tilde",
        "mabuchi_rel",
        "i_sandwich_gap",
        "fs_gap",
        "hilb_gap",
    ];
    let trace_csv = csv(
        &columns,
        rows.iter().map(|r| {
            vec![
                r.sample.to_string(),
                f(r.epsilon),
                f(r.i_rel),
                f(r.l_tilde),
                f(r.z_tilde),
                f(r.p_tilde),
                f(r.mabuchi_rel),
                f(r.i_sandwich_gap),
                f(r.fs_gap),
                f(r.hilb_gap),
            ]
        }),
    );
    let result = json!({
        "initial": base_report,
        "samples": rows.len(),
        "min_i_sandwich_gap": min(|r| r.i_sandwich_gap),
        "min_fs_gap": min(|r| r.fs_gap),
        "min_hilb_gap": min(|r| r.hilb_gap),
    });
    Ok(JobOutput { columns, trace_json: json!(rows), trace_csv, result, extra: Vec::new(), failure: None })
}

#[derive(Serialize)]
struct ConvexityRow {
    geodesic: usize,
    min_second_difference: f64,
    scale: f64,
    log_det_affine_residual: f64,
}

fn convexity(cfg: &RunConfig, grid: &QuadratureGrid, h0: &GramMetric) -> Result<JobOutput, CliError> {
    let h_ref = reference(grid)?;
    let mut rng = sampling::rng(cfg.seed);
    let d = grid.dim();
    let inputs: Vec<_> = (0..cfg.samples)
        .map(|s| (s, perturb(h0, epsilon_for(s), &mut rng), hermitian_gaussian(d, &mut rng) * C64::new(1.5, 0.0)))
        .collect();
    let rows = inputs
        .par_iter()
        .map(|(s, base, a)| -> balmet_core::Result<ConvexityRow> {
            let g = Geodesic::from_generator(base, a)?;
            let sample = z_along_geodesic(&g, &h_ref, grid, 5)?;
            Ok(ConvexityRow {
                geodesic: *s,
                min_second_difference: sample.second_differences.iter().copied().fold(f64::INFINITY, f64::min),
                scale: sample.scale,
                log_det_affine_residual: sample.log_det_affine_residual,
            })
        })
        .collect::<balmet_core::Result<Vec<_>>>()
        .map_err(numerics)?;
    let min_normalized = rows.iter().map(|r| r.min_second_difference / r.scale).fold(f64::INFINITY, f64::min);
    let max_affine = rows.iter().map(|r| r.log_det_affine_residual).fold(0.0, f64::max);
    let columns = vec!["geodesic", "min_second_difference", "scale", "log_det_affine_residual"];
    let trace_csv = csv(
        &columns,
        rows.iter().map(|r| {
            vec![r.geodesic.to_string(), f(r.min_second_difference), f(r.scale), f(r.log_det_affine_residual)]
        }),
    );
    let result = json!({
        "geodesics": rows.len(),
        "min_second_difference": rows.iter().map(|r| r.min_second_difference).fold(f64::INFINITY, f64::min),
        "min_normalized_second_difference": min_normalized,
        "max_log_det_affine_residual": max_affine,
        "convex": min_normalized >= -1e-9,
    });
    Ok(JobOutput { columns, trace_json: json!(rows), trace_csv, result, extra: Vec::new(), failure: None })
}

fn fixed_class(cfg: &RunConfig) -> FixedClassMetric {
    FixedClassMetric::perturbed(cfg.geometry.k, cfg.sweep.epsilon, cfg.seed)
}

fn bergman(cfg: &RunConfig) -> Result<JobOutput, CliError> {
    let h1 = fixed_class(cfg);
    let ks = &cfg.sweep.k_values;
    let residuals =
        ks.par_iter().map(|&k| bergman_residual(k, &h1)).collect::<balmet_core::Result<Vec<_>>>().map_err(numerics)?;
    let columns = vec!["k", "bergman_residual"];
    let trace_csv = csv(&columns, ks.iter().zip(&residuals).map(|(k, r)| vec![k.to_string(), f(*r)]));
    let rows: Vec<Value> = ks.iter().zip(&residuals).map(|(k, r)| json!({ "k": k, "bergman_residual": r })).collect();
    let result = json!({
        "k0": cfg.geometry.k,
        "rows": rows,
        "non_increasing": is_non_increasing(&residuals, true),
    });
    Ok(JobOutput { columns, trace_json: json!(rows), trace_csv, result, extra: Vec::new(), failure: None })
}

fn mabuchi_sweep(cfg: &RunConfig) -> Result<JobOutput, CliError> {
    let h0 = FixedClassMetric::round(cfg.geometry.k);
    let h1 = fixed_class(cfg);
    let sweep = AsymptoticSweep::run(&cfg.sweep.k_values, &h0, &h1, cfg.sweep.mabuchi_steps).map_err(numerics)?;
    let bergman: Vec<f64> = sweep.rows.iter().map(|r| r.bergman_residual).collect();
    let gaps: Vec<f64> = sweep.rows.iter().map(|r| r.mabuchi_gap).collect();
    let result = json!({
        "k0": cfg.geometry.k,
        "rows": sweep.rows,
        "bergman_non_increasing": is_non_increasing(&bergman, true),
        "mabuchi_gap_non_increasing": is_non_increasing(&gaps, true),
        "final_relative_gap": sweep.rows.last().map(|r| r.mabuchi_relative_gap),
    });
    Ok(JobOutput {
        columns: AsymptoticSweep::CSV_HEADER.split(',').collect(),
        trace_json: serde_json::to_value(&sweep).expect("sweep serializes"),
        trace_csv: sweep.to_csv(),
        result,
        extra: Vec::new(),
        failure: None,
    })
}
