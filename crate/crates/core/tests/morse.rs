mod common;

use common::{conjugate_points_s, conjugate_points_t, model, v2};
use maupertuis::garnier::{separatrix_family, solve_separatrix_geodesic, solve_separatrix_trajectory};
use maupertuis::grid::linspace;
use maupertuis::morse::{
    conjugate_points, jacobi_equation_residual, jacobi_field_from_family, morse_inequality_check, newton_jacobi_residual,
    poincare_series_loop_sphere, record_location, separatrix_morse_series,
};
use maupertuis::riemann::integrate_geodesic_on_grid;
use maupertuis::{Chart, DVector, MetricField, ParameterKind, PathSample};
use std::f64::consts::PI;

const ORBITS: [f64; 5] = [-1.2, -0.4, 0.0, 0.5, 1.5];

fn window(path: &PathSample, lo: usize, hi: usize) -> PathSample {
    PathSample::new(
        path.kind,
        path.grid[lo..hi].to_vec(),
        path.points[lo..hi].to_vec(),
        path.tangents[lo..hi].to_vec(),
        path.energies[lo..hi].to_vec(),
    )
    .unwrap()
}

#[test]
fn family_field_matches_the_explicit_field() {
    let m = model();
    let half = m.loop_length() / 2.0;
    let grid = linspace(-half, half, 801);
    let family = separatrix_family(&m, ParameterKind::ArcLength, Chart::Cartesian, 0.0);
    for a in ORBITS {
        let explicit = solve_separatrix_geodesic(&m, a, &grid).unwrap().explicit_jacobi_field(Chart::Cartesian);
        let differenced = jacobi_field_from_family(&family, a, &grid).unwrap();
        let alpha = differenced.iter().zip(&explicit).map(|(x, y)| x.dot(y)).sum::<f64>()
            / explicit.iter().map(|y| y.norm_squared()).sum::<f64>();
        let scale = explicit.iter().fold(0.0f64, |s, y| s.max(y.norm()));
        for (x, y) in differenced.iter().zip(&explicit) {
            assert!((x - y * alpha).norm() <= 1e-4 * alpha.abs() * scale, "a = {a}");
        }
        // ∂/∂a of the orbit constant, so no rescaling is needed at all
        assert!((alpha - 1.0).abs() < 1e-6);
    }
}

#[test]
fn explicit_field_solves_the_jacobi_equation() {
    let m = model();
    let h = m.system().jacobi_metric();
    let half = m.loop_length() / 2.0;
    let grid = linspace(-half, half, 801);
    for a in ORBITS {
        let sol = solve_separatrix_geodesic(&m, a, &grid).unwrap();
        let path = sol.path(Chart::Cartesian).unwrap();
        let field = sol.explicit_jacobi_field(Chart::Cartesian);
        // the metric degenerates at D, so stay 5% of the loop away from it
        let sub = window(&path, 40, 761);
        assert!(jacobi_equation_residual(&h, &sub, &field[40..761]).unwrap() < 1e-3, "a = {a}");
    }
}

#[test]
fn time_family_solves_the_linearised_newton_equation() {
    let m = model();
    let sys = m.system();
    let family = separatrix_family(&m, ParameterKind::Time, Chart::Cartesian, 0.0);
    for a in ORBITS {
        let tf = m.sigma_bar_sq() * a;
        let grid = linspace(tf - 8.0, tf + 8.0, 1601);
        let path = solve_separatrix_trajectory(&m, a, 0.0, &grid).unwrap().path(Chart::Cartesian).unwrap();
        let field = jacobi_field_from_family(&family, a, &grid).unwrap();
        assert!(newton_jacobi_residual(&sys, &path, &field).unwrap() < 1e-5, "a = {a}");
    }
}

#[test]
fn each_loop_meets_the_focus_once() {
    let m = model();
    for a in ORBITS {
        let s = conjugate_points_s(&m, a, 1, 801);
        assert_eq!(s.len(), 1, "a = {a}");
        assert!((&s[0].1 - m.crossed_focus()).norm() < 1e-3);
        let t = conjugate_points_t(&m, a, 1, 20.0, 4001);
        assert_eq!(t.len(), 1, "a = {a}");
        assert!((&t[0].1 - m.crossed_focus()).norm() < 1e-3);
        assert!((t[0].0 - m.sigma_bar_sq() * a).abs() < 1e-6);
    }
}

#[test]
fn both_pictures_agree_on_the_iterates() {
    let m = model();
    for a in ORBITS {
        let s = conjugate_points_s(&m, a, 2, 801);
        let t = conjugate_points_t(&m, a, 2, 20.0, 4001);
        assert_eq!(s.len(), 3, "a = {a}");
        assert_eq!(t.len(), s.len(), "a = {a}");
        for (x, y) in s.iter().zip(&t) {
            assert!((&x.1 - &y.1).norm() < 1e-3, "a = {a}: {} vs {}", x.1, y.1);
        }
        // focus, base point, focus again
        assert!((&s[1].1 - m.vacuum()).norm() < 1e-12);
        // the grid starts at -L/2, so the junction sits at +L/2
        assert!((s[1].0 - m.loop_length() / 2.0).abs() < 1e-9);
    }
}

#[test]
fn sphere_conjugate_point_sits_at_pi() {
    let g = MetricField::round_sphere();
    let grid = linspace(0.0, 5.0, 1001);
    let p0 = v2(PI / 2.0, 0.0);
    let (geo, j) = {
        // the equator and its tilted neighbours through the same point
        let base = integrate_geodesic_on_grid(&g, &p0, &v2(0.0, 1.0), 0.0, &grid, 1e-12).unwrap();
        let eps = 1e-4;
        let member = |d: f64| {
            integrate_geodesic_on_grid(&g, &p0, &v2(d.sin(), d.cos()), 0.0, &grid, 1e-12).unwrap().points
        };
        let (plus, minus) = (member(eps), member(-eps));
        let field: Vec<DVector<f64>> = plus.iter().zip(&minus).map(|(p, q)| (p - q) / (2.0 * eps)).collect();
        (base, field)
    };
    let records = conjugate_points(&g, &geo, &j, 0.05).unwrap();
    assert_eq!(records.len(), 1);
    assert!((records[0].parameter_value - PI).abs() < 1e-4);
    let at = record_location(&geo, &records[0]);
    assert!((&at - v2(PI / 2.0, PI)).norm() < 1e-3);
}

#[test]
fn separatrix_series_and_inequalities() {
    let series = separatrix_morse_series(3).unwrap();
    assert_eq!(series.coefficients(), &[1; 8]);
    let poincare = poincare_series_loop_sphere(2, 7).unwrap();
    assert_eq!(series, poincare);
    assert!(morse_inequality_check(&series, &poincare).unwrap());
    assert_eq!(poincare_series_loop_sphere(3, 7).unwrap().coefficients(), &[1, 0, 1, 0, 1, 0, 1, 0]);
    for d in 0..6 {
        let s = separatrix_morse_series(d).unwrap();
        assert!(s.coefficients().iter().all(|c| *c == 1));
        assert_eq!(s.truncation(), 2 * d + 1);
    }
}
