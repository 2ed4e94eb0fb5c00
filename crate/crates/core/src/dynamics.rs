//! Natural systems T − U, Newton flow, and the time ↔ Jacobi arc-length map.

use std::sync::Arc;

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::grid;
use crate::ode::{self, OdeOptions};
pub use crate::path::{ParameterKind, PathSample};
use crate::riemann::{self, fd_step, ChartDomain, MetricField, ScalarFn, VectorFn};

pub type MatrixFn = Arc<dyn Fn(&DVector<f64>) -> DMatrix<f64> + Send + Sync>;

/// Kinetic energy from a metric plus a potential, at a fixed energy level i₁.
#[derive(Clone)]
pub struct NaturalSystem {
    metric: MetricField,
    potential: ScalarFn,
    differential: Option<VectorFn>,
    hessian: Option<MatrixFn>,
    energy: f64,
    jacobi_floor: f64,
}

impl NaturalSystem {
    pub fn new(
        metric: MetricField,
        potential: impl Fn(&DVector<f64>) -> f64 + Send + Sync + 'static,
        energy: f64,
    ) -> Self {
        NaturalSystem {
            metric,
            potential: Arc::new(potential),
            differential: None,
            hessian: None,
            energy,
            jacobi_floor: 1e-12,
        }
    }

    /// Closed-form partial derivatives ∂_i U (a covector, not the gradient).
    pub fn with_differential(mut self, du: impl Fn(&DVector<f64>) -> DVector<f64> + Send + Sync + 'static) -> Self {
        self.differential = Some(Arc::new(du));
        self
    }

    /// Closed-form coordinate Hessian ∂_i∂_j U.
    pub fn with_hessian(mut self, hu: impl Fn(&DVector<f64>) -> DMatrix<f64> + Send + Sync + 'static) -> Self {
        self.hessian = Some(Arc::new(hu));
        self
    }

    /// Smallest Jacobi factor 2(i₁ − U) the Jacobi metric's domain admits.
    pub fn with_jacobi_floor(mut self, floor: f64) -> Self {
        self.jacobi_floor = floor;
        self
    }

    pub fn with_energy(mut self, energy: f64) -> Self {
        self.energy = energy;
        self
    }

    pub fn metric(&self) -> &MetricField {
        &self.metric
    }

    pub fn energy_level(&self) -> f64 {
        self.energy
    }

    pub fn dim(&self) -> usize {
        self.metric.dim()
    }

    pub fn potential(&self, p: &DVector<f64>) -> f64 {
        (self.potential)(p)
    }

    /// ∂_i U, closed form or central differences.
    pub fn differential(&self, p: &DVector<f64>) -> DVector<f64> {
        if let Some(du) = &self.differential {
            return du(p);
        }
        DVector::from_fn(p.len(), |i, _| {
            let h = fd_step(p[i]);
            let mut pp = p.clone();
            let mut pm = p.clone();
            pp[i] += h;
            pm[i] -= h;
            (self.potential(&pp) - self.potential(&pm)) / (2.0 * h)
        })
    }

    /// grad U = g⁻¹ dU.
    pub fn gradient(&self, p: &DVector<f64>) -> Result<DVector<f64>> {
        let g = self.metric.metric_at(p)?;
        let du = self.differential(p);
        g.lu().solve(&du).ok_or(Error::DegenerateMetric { point: p.iter().copied().collect(), det: 0.0 })
    }

    /// ∂_i∂_j U.
    pub fn coordinate_hessian(&self, p: &DVector<f64>) -> DMatrix<f64> {
        if let Some(h) = &self.hessian {
            return h(p);
        }
        let d = p.len();
        let mut out = DMatrix::zeros(d, d);
        if self.differential.is_some() {
            for j in 0..d {
                let h = fd_step(p[j]);
                let mut pp = p.clone();
                let mut pm = p.clone();
                pp[j] += h;
                pm[j] -= h;
                let col = (self.differential(&pp) - self.differential(&pm)) / (2.0 * h);
                out.set_column(j, &col);
            }
            return (&out + out.transpose()) * 0.5;
        }
        let h: Vec<f64> = p.iter().map(|x| f64::EPSILON.powf(0.25) * x.abs().max(1.0)).collect();
        let u = |q: &DVector<f64>| self.potential(q);
        for i in 0..d {
            for j in i..d {
                let mut acc = 0.0;
                for (si, sj, w) in [(1.0, 1.0, 1.0), (1.0, -1.0, -1.0), (-1.0, 1.0, -1.0), (-1.0, -1.0, 1.0)] {
                    let mut q = p.clone();
                    q[i] += si * h[i];
                    q[j] += sj * h[j];
                    acc += w * u(&q);
                }
                let v = acc / (4.0 * h[i] * h[j]);
                out[(i, j)] = v;
                out[(j, i)] = v;
            }
        }
        out
    }

    /// Covariant Hessian ∇²U(X, Y) = ∂_i∂_jU − Γᵏ_ij ∂_kU.
    pub fn covariant_hessian(&self, p: &DVector<f64>) -> Result<DMatrix<f64>> {
        let gamma = self.metric.christoffel(p)?;
        let du = self.differential(p);
        let mut h = self.coordinate_hessian(p);
        let d = p.len();
        for i in 0..d {
            for j in 0..d {
                let mut c = 0.0;
                for k in 0..d {
                    c += gamma.get(k, i, j) * du[k];
                }
                h[(i, j)] -= c;
            }
        }
        Ok(h)
    }

    /// Jacobi conformal factor 2(i₁ − U).
    pub fn jacobi_factor(&self, p: &DVector<f64>) -> f64 {
        2.0 * (self.energy - self.potential(p))
    }

    /// The Jacobi metric h = 2(i₁ − U)·g, restricted to where the factor exceeds the floor.
    pub fn jacobi_metric(&self) -> MetricField {
        let (s1, s2, s3) = (self.clone(), self.clone(), self.clone());
        let floor = self.jacobi_floor;
        let admissible = ChartDomain::new(move |p| s3.jacobi_factor(p) - floor, 0.0);
        riemann::conformal_transform_with_gradient(
            &self.metric,
            move |p| s1.jacobi_factor(p),
            move |p| -2.0 * s2.differential(p),
        )
        .with_domain(self.metric.domain().intersect(&admissible))
    }

    /// Velocity along `direction` whose energy is exactly i₁.
    pub fn velocity_on_shell(&self, p: &DVector<f64>, direction: &DVector<f64>) -> Result<DVector<f64>> {
        let w = self.energy - self.potential(p);
        if !(w > 0.0) {
            return Err(Error::DegenerateFactor { index: 0, value: 2.0 * w, floor: 0.0 });
        }
        let n = self.metric.norm(p, direction)?;
        if !(n > 0.0) {
            return Err(Error::ZeroTangent(0));
        }
        Ok(direction * ((2.0 * w).sqrt() / n))
    }
}

/// Coordinate acceleration −Γ(v, v) − grad U.
pub fn newton_rhs(system: &NaturalSystem, p: &DVector<f64>, v: &DVector<f64>) -> Result<DVector<f64>> {
    let gamma = system.metric.christoffel(p)?;
    Ok(-gamma.contract(v, v) - system.gradient(p)?)
}

/// ½‖v‖²_g + U(p).
pub fn energy(system: &NaturalSystem, p: &DVector<f64>, v: &DVector<f64>) -> Result<f64> {
    Ok(0.5 * system.metric.inner(p, v, v)? + system.potential(p))
}

fn newton_state_rhs(system: &NaturalSystem, y: &DVector<f64>) -> Option<DVector<f64>> {
    let d = system.dim();
    let x = y.rows(0, d).into_owned();
    let v = y.rows(d, d).into_owned();
    let a = newton_rhs(system, &x, &v).ok()?;
    let mut out = DVector::zeros(2 * d);
    out.rows_mut(0, d).copy_from(&v);
    out.rows_mut(d, d).copy_from(&a);
    Some(out)
}

fn initial_state(system: &NaturalSystem, p0: &DVector<f64>, v0: &DVector<f64>) -> Result<DVector<f64>> {
    system.metric.metric_at(p0)?;
    let d = system.dim();
    if v0.len() != d {
        return Err(Error::InvalidInput("velocity dimension mismatch".into()));
    }
    let e = energy(system, p0, v0)?;
    if !e.is_finite() {
        return Err(Error::InvalidInput("initial energy is not finite".into()));
    }
    let mut y0 = DVector::zeros(2 * d);
    y0.rows_mut(0, d).copy_from(p0);
    y0.rows_mut(d, d).copy_from(v0);
    Ok(y0)
}

fn package(system: &NaturalSystem, sol: ode::Solution, e0: f64) -> Result<PathSample> {
    let d = system.dim();
    let mut path = riemann::states_to_path(ParameterKind::Time, d, sol.t, sol.y, |p, v| {
        energy(system, p, v).unwrap_or(f64::NAN)
    });
    path.energy_drift = Some(path.energies.iter().map(|e| (e - e0).abs()).fold(0.0, f64::max));
    riemann::finish(sol.stop, path)
}

/// Newton trajectory from `(p0, v0)` at `span.0` to `span.1`, adaptive output.
pub fn integrate_trajectory(
    system: &NaturalSystem,
    p0: &DVector<f64>,
    v0: &DVector<f64>,
    span: (f64, f64),
    tol: f64,
) -> Result<PathSample> {
    riemann::check_tol(tol)?;
    let y0 = initial_state(system, p0, v0)?;
    let e0 = energy(system, p0, v0)?;
    let d = system.dim();
    let domain = system.metric.domain().clone();
    let sol = ode::integrate(
        |_, y| newton_state_rhs(system, y),
        |y| domain.contains(&y.rows(0, d).into_owned()),
        span.0,
        span.1,
        &y0,
        &OdeOptions::with_tol(tol),
        ode::Output::Steps,
    );
    package(system, sol, e0)
}

/// Newton trajectory through `(p0, v0)` at time `t0`, sampled on `grid`.
pub fn integrate_trajectory_on_grid(
    system: &NaturalSystem,
    p0: &DVector<f64>,
    v0: &DVector<f64>,
    t0: f64,
    grid: &[f64],
    tol: f64,
) -> Result<PathSample> {
    riemann::check_tol(tol)?;
    let y0 = initial_state(system, p0, v0)?;
    let e0 = energy(system, p0, v0)?;
    let d = system.dim();
    let domain = system.metric.domain().clone();
    let sol = ode::integrate_through(
        |_, y| newton_state_rhs(system, y),
        |y| domain.contains(&y.rows(0, d).into_owned()),
        t0,
        &y0,
        grid,
        &OdeOptions::with_tol(tol),
    )?;
    package(system, sol, e0)
}

/// Max g-norm of Dγ̇/dt + grad U over the samples.
pub fn newton_residual(system: &NaturalSystem, path: &PathSample) -> Result<f64> {
    let acc = riemann::covariant_derivative_along(&system.metric, path, &path.tangents)?;
    let mut worst: f64 = 0.0;
    for (p, a) in path.points.iter().zip(&acc) {
        let r = a + system.gradient(p)?;
        worst = worst.max(system.metric.norm(p, &r)?);
    }
    Ok(worst)
}

/// Tolerances for the reparametrisations.
#[derive(Clone, Copy, Debug)]
pub struct ReparamOptions {
    /// Admissible |energy − i₁|, scaled by max(1, |i₁|).
    pub energy_tolerance: f64,
    /// ε_deg as a fraction of the largest i₁ − U along the path.
    pub floor_ratio: f64,
}

impl Default for ReparamOptions {
    fn default() -> Self {
        ReparamOptions { energy_tolerance: 1e-6, floor_ratio: 1e-6 }
    }
}

fn jacobi_weights(system: &NaturalSystem, path: &PathSample, opts: &ReparamOptions) -> Result<Vec<f64>> {
    let w: Vec<f64> = path.points.iter().map(|p| system.energy - system.potential(p)).collect();
    let scale = w.iter().fold(0.0f64, |m, v| m.max(*v));
    let floor = opts.floor_ratio * scale;
    for (index, v) in w.iter().enumerate() {
        if !(*v > floor) || !(*v > 0.0) {
            return Err(Error::DegenerateFactor { index, value: 2.0 * v, floor: 2.0 * floor });
        }
    }
    Ok(w)
}

fn check_energies(system: &NaturalSystem, points: &[DVector<f64>], velocities: &[DVector<f64>], opts: &ReparamOptions) -> Result<Vec<f64>> {
    let bound = opts.energy_tolerance * system.energy.abs().max(1.0);
    let mut out = Vec::with_capacity(points.len());
    for (p, v) in points.iter().zip(velocities) {
        let e = energy(system, p, v)?;
        if !((e - system.energy).abs() <= bound) {
            return Err(Error::EnergyMismatch { expected: system.energy, found: e, bound });
        }
        out.push(e);
    }
    Ok(out)
}

/// Reparametrise a Newton trajectory by Jacobi arc length, ds/dt = 2(i₁ − U).
///
/// The arc length starts at 0 on the first sample.
pub fn time_to_arclength(system: &NaturalSystem, path: &PathSample) -> Result<PathSample> {
    time_to_arclength_with(system, path, &ReparamOptions::default())
}

pub fn time_to_arclength_with(system: &NaturalSystem, path: &PathSample, opts: &ReparamOptions) -> Result<PathSample> {
    if path.kind != ParameterKind::Time {
        return Err(Error::InvalidInput("time_to_arclength needs a time-parametrised path".into()));
    }
    let energies = check_energies(system, &path.points, &path.tangents, opts)?;
    let w = jacobi_weights(system, path, opts)?;
    let rate: Vec<f64> = w.iter().map(|w| 2.0 * w).collect();
    let drate: Vec<f64> = path
        .points
        .iter()
        .zip(&path.tangents)
        .map(|(p, v)| -2.0 * system.differential(p).dot(v))
        .collect();
    let s = grid::cumulative_hermite(&path.grid, &rate, &drate)?;
    if !grid::is_strictly_increasing(&s) {
        return Err(Error::InvalidInput("arc length is not strictly increasing".into()));
    }
    let tangents = path.tangents.iter().zip(&rate).map(|(v, r)| v / *r).collect();
    let mut out = PathSample::new(ParameterKind::ArcLength, s, path.points.clone(), tangents, energies)?;
    out.energy_drift = path.energy_drift;
    Ok(out)
}

/// Inverse of [`time_to_arclength`]: dt/ds = 1/(2(i₁ − U)), time starting at 0.
pub fn arclength_to_time(system: &NaturalSystem, path: &PathSample) -> Result<PathSample> {
    arclength_to_time_with(system, path, &ReparamOptions::default())
}

pub fn arclength_to_time_with(system: &NaturalSystem, path: &PathSample, opts: &ReparamOptions) -> Result<PathSample> {
    if path.kind != ParameterKind::ArcLength {
        return Err(Error::InvalidInput("arclength_to_time needs an arc-length-parametrised path".into()));
    }
    let w = jacobi_weights(system, path, opts)?;
    let velocities: Vec<DVector<f64>> = path.tangents.iter().zip(&w).map(|(x, w)| x * (2.0 * w)).collect();
    let energies = check_energies(system, &path.points, &velocities, opts)?;
    let rate: Vec<f64> = w.iter().map(|w| 0.5 / w).collect();
    let drate: Vec<f64> = path
        .points
        .iter()
        .zip(&path.tangents)
        .zip(&w)
        .map(|((p, x), w)| 2.0 * system.differential(p).dot(x) / (4.0 * w * w))
        .collect();
    let t = grid::cumulative_hermite(&path.grid, &rate, &drate)?;
    let mut out = PathSample::new(ParameterKind::Time, t, path.points.clone(), velocities, energies)?;
    out.energy_drift = path.energy_drift;
    Ok(out)
}

/// Longest contiguous stretch around the deepest sample where i₁ − U stays
/// above `floor_ratio`·max(i₁ − U); used to cut separatrices off before the vacua.
pub fn truncate_to_admissible(system: &NaturalSystem, path: &PathSample, floor_ratio: f64) -> PathSample {
    if path.is_empty() {
        return path.clone();
    }
    let w: Vec<f64> = path.points.iter().map(|p| system.energy - system.potential(p)).collect();
    let (imax, wmax) = w.iter().enumerate().fold((0, f64::NEG_INFINITY), |acc, (i, v)| if *v > acc.1 { (i, *v) } else { acc });
    let floor = floor_ratio * wmax;
    let mut lo = imax;
    while lo > 0 && w[lo - 1] > floor {
        lo -= 1;
    }
    let mut hi = imax;
    while hi + 1 < w.len() && w[hi + 1] > floor {
        hi += 1;
    }
    path.slice(lo, hi)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    fn v2(a: f64, b: f64) -> DVector<f64> {
        DVector::from_vec(vec![a, b])
    }

    fn free() -> NaturalSystem {
        NaturalSystem::new(MetricField::euclidean(2), |_| 0.0, 0.5)
    }

    // i₁ − U = ½ makes the Jacobi factor exactly 1
    fn constant(c: f64) -> NaturalSystem {
        NaturalSystem::new(MetricField::euclidean(2), move |_| c, c + 0.5)
    }

    #[test]
    fn free_particle_has_no_acceleration() {
        let a = newton_rhs(&free(), &v2(0.3, 1.0), &v2(2.0, -1.0)).unwrap();
        assert!(a.norm() < 1e-12);
    }

    #[test]
    fn free_particle_endpoint() {
        let p = integrate_trajectory(&free(), &v2(0.0, 0.0), &v2(1.0, 0.0), (0.0, 1.0), 1e-10).unwrap();
        let end = p.points.last().unwrap();
        assert_abs_diff_eq!(end[0], 1.0, epsilon = 1e-12);
        assert_eq!(p.kind, ParameterKind::Time);
    }

    #[test]
    fn rest_energy_is_the_potential() {
        let s = NaturalSystem::new(MetricField::euclidean(2), |p| p[0] * p[1], 0.0);
        assert_eq!(energy(&s, &v2(2.0, 3.0), &v2(0.0, 0.0)).unwrap(), 6.0);
    }

    #[test]
    fn fd_gradient_matches_closed_form() {
        let u = |p: &DVector<f64>| (p[0] * p[1]).sin() + p[0].powi(3);
        let du = |p: &DVector<f64>| v2(p[1] * (p[0] * p[1]).cos() + 3.0 * p[0] * p[0], p[0] * (p[0] * p[1]).cos());
        let a = NaturalSystem::new(MetricField::euclidean(2), u, 0.0).with_differential(du);
        let b = NaturalSystem::new(MetricField::euclidean(2), u, 0.0);
        let p = v2(0.7, -0.4);
        assert!((a.gradient(&p).unwrap() - b.gradient(&p).unwrap()).norm() < 1e-9);
        assert!((a.coordinate_hessian(&p) - b.coordinate_hessian(&p)).norm() < 1e-6);
    }

    #[test]
    fn constant_factor_reparametrisation_is_identity() {
        let s = constant(-0.3);
        let grid = grid::linspace(0.0, 2.0, 11);
        let path = integrate_trajectory_on_grid(&s, &v2(0.0, 0.0), &v2(0.6, 0.8), 0.0, &grid, 1e-12).unwrap();
        let arc = time_to_arclength(&s, &path).unwrap();
        for (a, b) in arc.grid.iter().zip(&grid) {
            assert_abs_diff_eq!(*a, *b, epsilon = 1e-12);
        }
        let back = arclength_to_time(&s, &arc).unwrap();
        for (a, b) in back.grid.iter().zip(&grid) {
            assert_abs_diff_eq!(*a, *b, epsilon = 1e-12);
        }
    }

    #[test]
    fn two_sample_path_round_trips() {
        let s = constant(0.0);
        let g = vec![0.0, 0.5];
        let pts = vec![v2(0.0, 0.0), v2(0.5, 0.0)];
        let tan = vec![v2(1.0, 0.0), v2(1.0, 0.0)];
        let p = PathSample::new(ParameterKind::ArcLength, g.clone(), pts, tan, vec![1.0; 2]).unwrap();
        let t = arclength_to_time(&s, &p).unwrap();
        assert_eq!(t.len(), 2);
        assert_eq!(t.grid, g);
    }

    #[test]
    fn off_shell_paths_are_rejected() {
        let s = constant(0.0);
        let g = grid::linspace(0.0, 1.0, 5);
        let path = integrate_trajectory_on_grid(&s, &v2(0.0, 0.0), &v2(1.5, 0.0), 0.0, &g, 1e-10).unwrap();
        assert!(matches!(time_to_arclength(&s, &path), Err(Error::EnergyMismatch { .. })));
    }

    #[test]
    fn jacobi_metric_of_constant_potential_is_flat() {
        let s = constant(2.0);
        let h = s.jacobi_metric();
        let p = v2(0.1, 0.2);
        assert!((h.metric_at(&p).unwrap() - DMatrix::identity(2, 2)).norm() < 1e-14);
        assert!(h.christoffel(&p).unwrap().max_abs() < 1e-14);
    }
}
