#![allow(dead_code)]

use maupertuis::dynamics::energy;
use maupertuis::garnier::{
    separatrix_family, singular_solution_time, singular_velocity_time, solve_separatrix_geodesic,
    solve_separatrix_trajectory,
};
use maupertuis::grid::linspace;
use maupertuis::morse::{conjugate_points, default_base_exclusion, jacobi_field_from_family, record_location};
use maupertuis::path::concat_fields;
use maupertuis::{Chart, DVector, GarnierModel, MetricField, ParameterKind, PathSample, SingularBranch};

pub fn model() -> GarnierModel {
    GarnierModel::new(0.5).unwrap()
}

pub fn v2(a: f64, b: f64) -> DVector<f64> {
    DVector::from_vec(vec![a, b])
}

/// Closed-form singular Newton solution through t = 0 on a uniform grid.
pub fn singular_path(m: &GarnierModel, branch: SingularBranch, span: (f64, f64), n: usize) -> PathSample {
    let grid = linspace(span.0, span.1, n);
    let sys = m.system();
    let points: Vec<_> = grid.iter().map(|t| singular_solution_time(m, branch, *t, 0.0)).collect();
    let tangents: Vec<_> = grid.iter().map(|t| singular_velocity_time(m, branch, *t, 0.0)).collect();
    let energies = points.iter().zip(&tangents).map(|(p, v)| energy(&sys, p, v).unwrap()).collect();
    PathSample::new(ParameterKind::Time, grid, points, tangents, energies).unwrap()
}

/// Separatrix trajectory of orbit constant a over a window centred on its focus crossing.
pub fn separatrix_time_path(m: &GarnierModel, a: f64, t0: f64, half_width: f64, n: usize) -> PathSample {
    let tf = m.sigma_bar_sq() * a - t0;
    let grid = linspace(tf - half_width, tf + half_width, n);
    solve_separatrix_trajectory(m, a, t0, &grid).unwrap().path(Chart::Cartesian).unwrap()
}

/// The three extremals used for the second-variation identities.
pub fn garnier_extremals(m: &GarnierModel, n: usize) -> Vec<(&'static str, PathSample)> {
    vec![
        ("edge", singular_path(m, SingularBranch::EdgeQ2Zero, (-3.0, 3.0), n)),
        ("ellipse", singular_path(m, SingularBranch::EdgeEllipse, (-3.0, 3.0), n)),
        ("separatrix a=0.3", separatrix_time_path(m, 0.3, 0.0, 3.0, n)),
    ]
}

/// Symmetric Hausdorff distance between two point clouds.
pub fn hausdorff(a: &[DVector<f64>], b: &[DVector<f64>]) -> f64 {
    let one_way = |x: &[DVector<f64>], y: &[DVector<f64>]| {
        x.iter().map(|p| y.iter().map(|q| (p - q).norm()).fold(f64::INFINITY, f64::min)).fold(0.0, f64::max)
    };
    one_way(a, b).max(one_way(b, a))
}

/// Conjugate points of the `copies`-fold loop of orbit a, seen from D in the
/// (h, s) picture; returns the record parameters and Cartesian locations.
pub fn conjugate_points_s(m: &GarnierModel, a: f64, copies: usize, n: usize) -> Vec<(f64, DVector<f64>)> {
    let half = m.loop_length() / 2.0;
    let sol = solve_separatrix_geodesic(m, a, &linspace(-half, half, n)).unwrap();
    let path = sol.path(Chart::Cartesian).unwrap();
    let field = sol.explicit_jacobi_field(Chart::Cartesian);
    let (mut p, mut j) = (path.clone(), field.clone());
    for _ in 1..copies {
        p = p.concat(&path).unwrap();
        j = concat_fields(&j, &field);
    }
    records(&m.system().jacobi_metric(), &p, &j)
}

/// Same in the (g, U, t) picture: the trajectory over t_F ± half_width, with
/// the Jacobi field differenced from the time-parametrised family.
pub fn conjugate_points_t(m: &GarnierModel, a: f64, copies: usize, half_width: f64, n: usize) -> Vec<(f64, DVector<f64>)> {
    let t0 = 0.0;
    let tf = m.sigma_bar_sq() * a - t0;
    let grid = linspace(tf - half_width, tf + half_width, n);
    let path = solve_separatrix_trajectory(m, a, t0, &grid).unwrap().path(Chart::Cartesian).unwrap();
    let family = separatrix_family(m, ParameterKind::Time, Chart::Cartesian, t0);
    let field = jacobi_field_from_family(&family, a, &grid).unwrap();
    let (mut p, mut j) = (path.clone(), field.clone());
    for _ in 1..copies {
        p = p.concat(&path).unwrap();
        j = concat_fields(&j, &field);
    }
    records(&MetricField::euclidean(2), &p, &j)
}

fn records(metric: &MetricField, path: &PathSample, field: &[DVector<f64>]) -> Vec<(f64, DVector<f64>)> {
    conjugate_points(metric, path, field, default_base_exclusion(path))
        .unwrap()
        .iter()
        .map(|r| (r.parameter_value, record_location(path, r)))
        .collect()
}
