mod common;

use common::{hausdorff, model, v2};
use maupertuis::dynamics::integrate_trajectory_on_grid;
use maupertuis::garnier::{
    cartesian_to_elliptic, elliptic_state, elliptic_to_cartesian, focus_velocity, orbit_residual,
    singular_geodesic_arclength, solve_separatrix_geodesic, stackel_hamiltonian, time_residual, BranchSigns,
};
use maupertuis::grid::linspace;
use maupertuis::riemann::integrate_geodesic_on_grid;
use maupertuis::SingularBranch;
use proptest::prelude::*;

#[test]
fn edge_geodesic_follows_the_cubic() {
    let m = model();
    let h = m.system().jacobi_metric();
    let hi = 2.0 / 3.0 - 0.05;
    let grid = linspace(-hi, hi, 401);
    // unit h-speed at the origin, where the factor is 1
    let geo = integrate_geodesic_on_grid(&h, &v2(0.0, 0.0), &v2(1.0, 0.0), 0.0, &grid, 1e-12).unwrap();
    for (s, p) in grid.iter().zip(&geo.points) {
        let q = singular_geodesic_arclength(&m, SingularBranch::EdgeQ2Zero, *s).unwrap();
        assert!((p - q).norm() < 1e-6, "s = {s}");
    }
}

#[test]
fn ellipse_geodesic_follows_the_cubic() {
    let m = model();
    let h = m.system().jacobi_metric();
    let hi = m.ellipse_length() / 2.0 - 0.05;
    let grid = linspace(-hi, hi, 401);
    let top = singular_geodesic_arclength(&m, SingularBranch::EdgeEllipse, 0.0).unwrap();
    let f = m.jacobi_factor(&top);
    let geo = integrate_geodesic_on_grid(&h, &top, &v2(1.0 / f.sqrt(), 0.0), 0.0, &grid, 1e-12).unwrap();
    for (s, p) in grid.iter().zip(&geo.points) {
        let q = singular_geodesic_arclength(&m, SingularBranch::EdgeEllipse, *s).unwrap();
        assert!((p - q).norm() < 1e-6, "s = {s}");
    }
}

#[test]
fn separable_integrals_are_conserved_along_integrated_trajectories() {
    let m = model();
    let sys = m.system();
    for a in [-1.0, 0.2, 0.8] {
        let tf = m.sigma_bar_sq() * a;
        let grid = linspace(tf - 3.0, tf + 3.0, 241);
        let path =
            integrate_trajectory_on_grid(&sys, &m.crossed_focus(), &focus_velocity(&m, a), tf, &grid, 1e-12).unwrap();
        let mut orbit = Vec::new();
        let mut time = Vec::new();
        for ((t, q), v) in grid.iter().zip(&path.points).zip(&path.tangents) {
            let Ok(st) = elliptic_state(&m, q, v) else { continue };
            // stay clear of the turning points, where the momentum signs flip
            let w = [(1.0 - st.mu[0]).sqrt(), (1.0 - st.mu[1]).sqrt()];
            if w.iter().any(|w| (w - m.sigma()).abs() < 1e-2 || (1.0 - w) < 1e-2) {
                continue;
            }
            let signs = BranchSigns::from_momenta(&st.pi);
            if let (Ok(o), Ok(r)) = (orbit_residual(&m, &st.mu, a, signs), time_residual(&m, &st.mu, *t, 0.0, signs)) {
                orbit.push(o);
                time.push(r);
            }
        }
        assert!(orbit.len() > 100);
        let spread = |v: &[f64]| v.iter().cloned().fold(f64::NEG_INFINITY, f64::max) - v.iter().cloned().fold(f64::INFINITY, f64::min);
        assert!(spread(&orbit) < 1e-6, "a = {a}: orbit spread {:e}", spread(&orbit));
        assert!(spread(&time) < 1e-6, "a = {a}: time spread {:e}", spread(&time));
    }
}

#[test]
fn stackel_hamiltonian_vanishes_on_the_separatrix() {
    let m = model();
    let sys = m.system();
    let a = 0.5;
    let tf = m.sigma_bar_sq() * a;
    let grid = linspace(tf - 2.0, tf + 2.0, 81);
    let path = integrate_trajectory_on_grid(&sys, &m.crossed_focus(), &focus_velocity(&m, a), tf, &grid, 1e-12).unwrap();
    for (q, v) in path.points.iter().zip(&path.tangents) {
        if let Ok(st) = elliptic_state(&m, q, v) {
            assert!(stackel_hamiltonian(&m, &st.mu, &st.pi).unwrap().abs() < 1e-8);
        }
    }
}

#[test]
fn distant_loops_hug_the_edges() {
    let m = model();
    let half = m.loop_length() / 2.0;
    let edges: Vec<_> = linspace(-2.0 / 3.0, 2.0 / 3.0, 801)
        .iter()
        .map(|s| singular_geodesic_arclength(&m, SingularBranch::EdgeQ2Zero, *s).unwrap())
        .chain(linspace(-m.ellipse_length() / 2.0, m.ellipse_length() / 2.0, 801).iter().map(|s| {
            let q = singular_geodesic_arclength(&m, SingularBranch::EdgeEllipse, *s).unwrap();
            v2(-q[0], q[1])
        }))
        .collect();
    let mut last = f64::INFINITY;
    for a in [4.0, 8.0, 16.0, -16.0] {
        let loop_points = solve_separatrix_geodesic(&m, a, &linspace(-half, half, 801)).unwrap().cartesian_points();
        let mirrored: Vec<_> = loop_points.iter().map(|q| v2(q[0], q[1].abs())).collect();
        let d = hausdorff(&mirrored, &edges);
        if a > 0.0 {
            assert!(d < last, "a = {a}: {d}");
            last = d;
        } else {
            // the family is symmetric under a -> -a
            assert!((d - last).abs() < 1e-9);
        }
    }
    assert!(last < 5e-2, "{last}");
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn chart_round_trip(r in 0.05f64..0.98, ang in 0.0f64..6.28) {
        let m = model();
        let q = v2(r * ang.cos(), m.sigma_bar_sq().sqrt() * r * ang.sin());
        // the chart degenerates on the axes and at the foci
        prop_assume!(q[0].abs() > 0.05 && q[1].abs() > 0.05);
        let mu = cartesian_to_elliptic(&m, &q).unwrap();
        let back = elliptic_to_cartesian(&m, &mu, [q[0].signum(), q[1].signum()]);
        prop_assert!((back - &q).norm() < 1e-10);
    }

    #[test]
    fn stackel_hamiltonian_is_the_energy(r in 0.05f64..0.95, ang in 0.2f64..2.9, vx in -1.0f64..1.0, vy in -1.0f64..1.0) {
        let m = model();
        let q = v2(r * ang.cos(), m.sigma_bar_sq().sqrt() * r * ang.sin());
        prop_assume!(q[0].abs() > 0.05);
        let v = v2(vx, vy);
        let st = elliptic_state(&m, &q, &v).unwrap();
        let e = 0.5 * v.norm_squared() + m.potential(&q);
        prop_assert!((stackel_hamiltonian(&m, &st.mu, &st.pi).unwrap() - e).abs() < 1e-9 * (1.0 + e.abs()));
    }
}
