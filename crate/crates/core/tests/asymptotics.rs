use balmet_core::asymptotics::*;
use balmet_core::hermitian::GramMetric;
use balmet_core::metrics::fs_metric;
use balmet_core::variety::{build_geometry, projective_line::binomial, GeometrySpec};

fn round(k: usize) -> GramMetric {
    GramMetric::from_diagonal(&(0..=k).map(|j| 1.0 / binomial(k, j)).collect::<Vec<_>>()).unwrap()
}

#[test]
fn fixed_class_round_metric_lifts_to_round() {
    let base = FixedClassMetric::round(2);
    assert_eq!(base.base_level(), 2);
    for k in [2, 4, 8] {
        let g = base.gram_at(k).unwrap();
        let want = round(k);
        let err = (g.entries() - want.entries()).iter().fold(0.0_f64, |a, z| a.max(z.norm()));
        assert!(err < 1e-12, "k={k} err={err}");
    }
    assert!(base.gram_at(3).is_err());
    assert!(base.gram_at(0).is_err());
}

#[test]
fn lifted_metrics_share_a_potential() {
    // K0^m on O(m k0) gives the same weight as m copies of K0.
    let base = FixedClassMetric::perturbed(2, 0.5, 3);
    let g2 = base.gram_at(2).unwrap();
    let g4 = base.gram_at(4).unwrap();
    let grid2 = build_geometry(&GeometrySpec::projective_line(2)).unwrap().0;
    let grid4 = build_geometry(&GeometrySpec::projective_line(4)).unwrap().0;
    let m2 = fs_metric(&g2, &grid2).unwrap();
    let m4 = fs_metric(&g4, &grid4).unwrap();
    assert_eq!(grid2.total_nodes(), grid4.total_nodes());
    for i in (0..grid2.total_nodes()).step_by(97) {
        assert_eq!(grid2.node(i).t, grid4.node(i).t);
        let (k2, k4) = (m2.kernel(i), m4.kernel(i));
        assert!((k4 - k2 * k2).abs() < 1e-12 * k4);
    }
}

#[test]
fn round_metric_has_no_bergman_residual() {
    for k in [2, 4, 8] {
        assert!(bergman_residual(k, &FixedClassMetric::round(2)).unwrap() < 1e-8);
    }
}

#[test]
fn bracket_removes_the_mean() {
    let (grid, h) = build_geometry(&GeometrySpec::projective_line(3)).unwrap();
    let m = fs_metric(&h, &grid).unwrap();
    assert!(bracket(&vec![2.5; grid.total_nodes()], &m, &grid).iter().all(|v| v.abs() < 1e-12));
    let vals: Vec<f64> = (0..grid.total_nodes()).map(|i| m.rho_vol(i)).collect();
    let b = bracket(&vals, &m, &grid);
    assert!(m.integrate(&grid, |i| b[i]).abs() < 1e-10);
}

#[test]
fn gap_vanishes_between_equal_and_rescaled_metrics() {
    let h = FixedClassMetric::perturbed(2, 0.5, 5);
    let gap = mabuchi_approximation_gap(4, &h, &h, 16).unwrap();
    assert_eq!(gap.gap, 0.0);
    assert_eq!(gap.relative_gap, 0.0);
    let g = h.gram_at(4).unwrap();
    let grid = build_geometry(&GeometrySpec::projective_line(4)).unwrap().0;
    let m0 = fs_metric(&g, &grid).unwrap();
    let gap = mabuchi_gap_on(&grid, &m0, &m0.scaled(0.7), 16).unwrap();
    assert!(gap.gap < 1e-10 && gap.mabuchi_term.abs() < 1e-10);
}

#[test]
fn gap_rejects_mismatched_levels() {
    let a = FixedClassMetric::round(2);
    let b = FixedClassMetric::round(1);
    assert!(mabuchi_approximation_gap(4, &a, &b, 16).is_err());
}

#[test]
fn small_sweep_is_well_formed() {
    let h0 = FixedClassMetric::round(2);
    let h1 = FixedClassMetric::perturbed(2, 0.3, 1);
    let sweep = AsymptoticSweep::run(&[2, 4, 6], &h0, &h1, 16).unwrap();
    assert_eq!(sweep.rows.iter().map(|r| r.k).collect::<Vec<_>>(), vec![2, 4, 6]);
    assert!(sweep.rows.iter().all(|r| r.bergman_residual.is_finite() && r.mabuchi_gap.is_finite()));
    assert!(sweep.rows[2].bergman_residual < sweep.rows[0].bergman_residual);
    let csv = sweep.to_csv();
    assert!(csv.starts_with("k,bergman_residual,mabuchi_gap,mabuchi_relative_gap\n"));
    assert_eq!(csv.lines().count(), 4);
    assert!(AsymptoticSweep::run(&[4, 2], &h0, &h1, 16).is_err());
}

#[test]
fn non_increasing_helper() {
    assert!(is_non_increasing(&[3.0, 2.0, 1.0], false));
    assert!(!is_non_increasing(&[1.0, 2.0, 1.5], false));
    assert!(is_non_increasing(&[1.0, 2.0, 1.5], true));
    assert!(!is_non_increasing(&[3.0, 2.0, 2.5], true));
}

#[test]
fn residuals_decrease_for_seeded_metrics() {
    let h0 = FixedClassMetric::round(2);
    for seed in 0..10 {
        let h1 = FixedClassMetric::perturbed(2, 0.3, seed);
        let sweep = AsymptoticSweep::run(&[4, 8, 12, 16], &h0, &h1, 32).unwrap();
        let bergman: Vec<f64> = sweep.rows.iter().map(|r| r.bergman_residual).collect();
        let gaps: Vec<f64> = sweep.rows.iter().map(|r| r.mabuchi_gap).collect();
        assert!(is_non_increasing(&bergman, true), "seed {seed}: {bergman:?}");
        assert!(is_non_increasing(&gaps, true), "seed {seed}: {gaps:?}");
        assert!(sweep.rows[3].mabuchi_relative_gap < 0.1, "seed {seed}");
    }
}

#[test]
fn balanced_metrics_have_round_mabuchi_energy() {
    use balmet_core::balance::{run_iteration, IterationConfig, IterationStatus};
    use balmet_core::functionals::mabuchi;
    use balmet_core::sampling::{perturb, rng};
    for k in [4, 8] {
        let grid = build_geometry(&GeometrySpec::projective_line(k)).unwrap().0;
        let trace =
            run_iteration(&perturb(&round(k), 0.5, &mut rng(k as u64)), &grid, &IterationConfig::default()).unwrap();
        assert_eq!(trace.status, IterationStatus::Converged);
        assert!(trace.last().unwrap().rho_flatness < 1e-8);
        let m = fs_metric(&trace.limit, &grid).unwrap();
        let r = fs_metric(&round(k), &grid).unwrap();
        assert!(mabuchi(&m, &r, &grid, 32).unwrap().value.abs() < 1e-6);
    }
}
