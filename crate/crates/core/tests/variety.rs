use balmet_core::duality::hilb;
use balmet_core::hermitian::GramMetric;
use balmet_core::metrics::fs_metric;
use balmet_core::variety::{build_geometry, integrate, GeometryKind, GeometrySpec, FERMAT};
use balmet_core::{Error, C64};
use std::f64::consts::PI;

fn other_cubic() -> Vec<C64> {
    let mut c: Vec<C64> = FERMAT.iter().map(|&x| C64::new(x, 0.0)).collect();
    c[6] = C64::new(1.3, 0.0);
    c[9] = C64::new(0.8, 0.2);
    c[4] = C64::new(-0.9, 0.0);
    c[1] = C64::new(0.0, 0.3);
    c[8] = C64::new(0.25, 0.0);
    c
}

#[test]
fn projective_line_dimensions_and_volumes() {
    for (k, v) in [(1, 2.0 * PI), (2, 4.0 * PI), (5, 10.0 * PI)] {
        let (grid, reference) = build_geometry(&GeometrySpec::projective_line(k)).unwrap();
        assert_eq!(grid.dim(), k + 1);
        assert_eq!(reference, GramMetric::identity(k + 1));
        assert!((grid.volume() - v).abs() < 1e-14);
        let m = fs_metric(&reference, &grid).unwrap();
        assert!(m.volume_error() < 1e-12);
        let ones = vec![1.0; grid.total_nodes()];
        let rho: Vec<f64> = (0..grid.total_nodes()).map(|i| m.rho_vol(i)).collect();
        let mass = integrate(&grid, &rho.iter().zip(&ones).map(|(a, b)| a * b).collect::<Vec<_>>()).unwrap();
        assert!((mass / v - 1.0).abs() < 1e-12);
    }
}

#[test]
fn projective_line_self_test() {
    let (grid, _) = build_geometry(&GeometrySpec::projective_line(7)).unwrap();
    let st = grid.self_test().unwrap();
    assert!(st.beta_max_rel_err.unwrap() < 1e-12);
    assert!(st.volume_rel_err < 1e-12);
    assert!(st.half_resolution_volume_rel_err.unwrap() < 1e-6);
}

#[test]
fn fermat_cubic_grid() {
    let spec = GeometrySpec::fermat_cubic(2);
    let (grid, reference) = build_geometry(&spec).unwrap();
    assert_eq!(grid.dim(), 6);
    assert_eq!(grid.kind(), GeometryKind::PlaneCubic);
    assert!((grid.volume() - 12.0 * PI).abs() < 1e-13);
    let st = grid.self_test().unwrap();
    eprintln!("{st:?}");
    assert!(st.volume_rel_err < 1e-8);
    let g = hilb(&fs_metric(&reference, &grid).unwrap(), &grid).unwrap();
    assert!(g.eigenvalues()[0] > 1e-6);
}

#[test]
fn general_cubic_grid() {
    let (grid, reference) = build_geometry(&GeometrySpec::plane_cubic(3, &other_cubic())).unwrap();
    assert_eq!(grid.dim(), 9);
    let st = grid.self_test().unwrap();
    eprintln!("{st:?}");
    assert!(st.volume_rel_err < 1e-8);
    let g = hilb(&fs_metric(&reference, &grid).unwrap(), &grid).unwrap();
    assert!(g.eigenvalues()[0] > 1e-8);
}

#[test]
fn singular_cubic_is_rejected() {
    let mut c: Vec<C64> = FERMAT.iter().map(|&x| C64::new(x, 0.0)).collect();
    c[4] = C64::new(-3.0, 0.0);
    assert!(matches!(build_geometry(&GeometrySpec::plane_cubic(2, &c)), Err(Error::SingularCubic(_))));
}

#[test]
fn resolution_guard() {
    let spec = GeometrySpec::projective_line(3).with_resolution(32, 15);
    assert!(matches!(build_geometry(&spec), Err(Error::Resolution(_))));
    let spec = GeometrySpec::projective_line(10).with_resolution(5, 64);
    assert!(matches!(build_geometry(&spec), Err(Error::Resolution(_))));
}

#[test]
fn spec_round_trips_through_json() {
    let spec = GeometrySpec::plane_cubic(2, &other_cubic()).with_resolution(48, 48);
    let text = serde_json::to_string(&spec).unwrap();
    let back: GeometrySpec = serde_json::from_str(&text).unwrap();
    assert_eq!(spec, back);
    let p1: GeometrySpec = serde_json::from_str(r#"{"kind":"projective_line","k":3}"#).unwrap();
    assert_eq!(p1, GeometrySpec::projective_line(3));
}
