//! Metrics on coordinate charts: Christoffel symbols, curvature, covariant
//! derivatives along sampled curves, conformal rescaling and geodesics.

use std::fmt;
use std::sync::Arc;

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::grid;
use crate::ode::{self, OdeOptions};
use crate::path::{ParameterKind, PathSample};

pub type MetricFn = Arc<dyn Fn(&DVector<f64>) -> Result<DMatrix<f64>> + Send + Sync>;
pub type ChristoffelFn = Arc<dyn Fn(&DVector<f64>) -> Result<Christoffel> + Send + Sync>;
pub type ScalarFn = Arc<dyn Fn(&DVector<f64>) -> f64 + Send + Sync>;
pub type VectorFn = Arc<dyn Fn(&DVector<f64>) -> DVector<f64> + Send + Sync>;

/// Default finite-difference step at `x`: cube root of machine epsilon,
/// scaled by the coordinate magnitude.
pub fn fd_step(x: f64) -> f64 {
    f64::EPSILON.cbrt() * x.abs().max(1.0)
}

/// Γᵏ_ij stored densely, index order (k, i, j).
#[derive(Clone, PartialEq)]
pub struct Christoffel {
    dim: usize,
    data: Vec<f64>,
}

impl fmt::Debug for Christoffel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("Christoffel").field("dim", &self.dim).field("data", &self.data).finish()
    }
}

impl Christoffel {
    pub fn zeros(dim: usize) -> Self {
        Christoffel { dim, data: vec![0.0; dim * dim * dim] }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn get(&self, k: usize, i: usize, j: usize) -> f64 {
        self.data[(k * self.dim + i) * self.dim + j]
    }

    /// Sets Γᵏ_ij and Γᵏ_ji together.
    pub fn set(&mut self, k: usize, i: usize, j: usize, v: f64) {
        let d = self.dim;
        self.data[(k * d + i) * d + j] = v;
        self.data[(k * d + j) * d + i] = v;
    }

    /// Γᵏ_ij uⁱ vʲ.
    pub fn contract(&self, u: &DVector<f64>, v: &DVector<f64>) -> DVector<f64> {
        let d = self.dim;
        DVector::from_fn(d, |k, _| {
            let mut acc = 0.0;
            for i in 0..d {
                for j in 0..d {
                    acc += self.get(k, i, j) * u[i] * v[j];
                }
            }
            acc
        })
    }

    pub fn max_abs_diff(&self, other: &Christoffel) -> f64 {
        self.data.iter().zip(&other.data).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max)
    }

    pub fn max_abs(&self) -> f64 {
        self.data.iter().fold(0.0, |m, v| m.max(v.abs()))
    }

    pub fn symmetry_defect(&self) -> f64 {
        let d = self.dim;
        let mut worst: f64 = 0.0;
        for k in 0..d {
            for i in 0..d {
                for j in 0..d {
                    worst = worst.max((self.get(k, i, j) - self.get(k, j, i)).abs());
                }
            }
        }
        worst
    }

    fn combine(&self, other: &Christoffel, alpha: f64, beta: f64) -> Christoffel {
        Christoffel {
            dim: self.dim,
            data: self.data.iter().zip(&other.data).map(|(a, b)| alpha * a + beta * b).collect(),
        }
    }
}

/// How Christoffel symbols are obtained.
#[derive(Clone)]
pub enum ChristoffelMode {
    Analytic(ChristoffelFn),
    /// Central differences of the metric; `None` uses [`fd_step`] per coordinate.
    FiniteDifference { step: Option<f64> },
}

/// Open chart domain `{ level(p) > margin }`.
#[derive(Clone)]
pub struct ChartDomain {
    level: ScalarFn,
    margin: f64,
}

impl ChartDomain {
    pub fn everywhere() -> Self {
        ChartDomain { level: Arc::new(|_| f64::INFINITY), margin: 0.0 }
    }

    /// `level` is positive inside and crosses zero on the boundary.
    pub fn new(level: impl Fn(&DVector<f64>) -> f64 + Send + Sync + 'static, margin: f64) -> Self {
        ChartDomain { level: Arc::new(level), margin }
    }

    pub fn contains(&self, p: &DVector<f64>) -> bool {
        p.iter().all(|x| x.is_finite()) && (self.level)(p) > self.margin
    }

    pub fn level(&self, p: &DVector<f64>) -> f64 {
        (self.level)(p)
    }

    pub fn margin(&self) -> f64 {
        self.margin
    }

    pub fn intersect(&self, other: &ChartDomain) -> ChartDomain {
        let (a, b) = (self.clone(), other.clone());
        ChartDomain {
            level: Arc::new(move |p| ((a.level)(p) - a.margin).min((b.level)(p) - b.margin)),
            margin: 0.0,
        }
    }
}

/// A Riemannian metric on a coordinate chart.
#[derive(Clone)]
pub struct MetricField {
    dim: usize,
    components: MetricFn,
    mode: ChristoffelMode,
    domain: ChartDomain,
}

impl MetricField {
    /// Metric from infallible components; finite-difference Christoffels, whole chart.
    pub fn new(dim: usize, g: impl Fn(&DVector<f64>) -> DMatrix<f64> + Send + Sync + 'static) -> Self {
        MetricField::fallible(dim, move |p| Ok(g(p)))
    }

    pub fn fallible(dim: usize, g: impl Fn(&DVector<f64>) -> Result<DMatrix<f64>> + Send + Sync + 'static) -> Self {
        MetricField {
            dim,
            components: Arc::new(g),
            mode: ChristoffelMode::FiniteDifference { step: None },
            domain: ChartDomain::everywhere(),
        }
    }

    pub fn with_christoffels(
        mut self,
        gamma: impl Fn(&DVector<f64>) -> Result<Christoffel> + Send + Sync + 'static,
    ) -> Self {
        self.mode = ChristoffelMode::Analytic(Arc::new(gamma));
        self
    }

    pub fn with_fd_step(mut self, step: f64) -> Self {
        self.mode = ChristoffelMode::FiniteDifference { step: Some(step) };
        self
    }

    /// Drops any analytic Christoffels in favour of finite differences.
    pub fn finite_difference(mut self) -> Self {
        self.mode = ChristoffelMode::FiniteDifference { step: None };
        self
    }

    pub fn with_domain(mut self, domain: ChartDomain) -> Self {
        self.domain = domain;
        self
    }

    pub fn euclidean(dim: usize) -> Self {
        MetricField::new(dim, move |_| DMatrix::identity(dim, dim)).with_christoffels(move |_| Ok(Christoffel::zeros(dim)))
    }

    /// Unit 2-sphere in (polar angle, azimuth).
    pub fn round_sphere() -> Self {
        MetricField::new(2, |p| {
            let s = p[0].sin();
            DMatrix::from_diagonal(&DVector::from_vec(vec![1.0, s * s]))
        })
        .with_christoffels(|p| {
            let (s, c) = p[0].sin_cos();
            let mut g = Christoffel::zeros(2);
            g.set(0, 1, 1, -s * c);
            g.set(1, 0, 1, c / s);
            Ok(g)
        })
        .with_domain(ChartDomain::new(|p| p[0].min(std::f64::consts::PI - p[0]), 1e-9))
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn domain(&self) -> &ChartDomain {
        &self.domain
    }

    pub fn mode(&self) -> &ChristoffelMode {
        &self.mode
    }

    pub fn is_analytic(&self) -> bool {
        matches!(self.mode, ChristoffelMode::Analytic(_))
    }

    pub fn check_point(&self, p: &DVector<f64>) -> Result<()> {
        if p.len() != self.dim {
            return Err(Error::InvalidInput(format!("point has dimension {}, metric {}", p.len(), self.dim)));
        }
        if !self.domain.contains(p) {
            return Err(Error::OutOfDomain(p.iter().copied().collect()));
        }
        Ok(())
    }

    /// g_ij(p) without domain checks.
    pub fn raw_components(&self, p: &DVector<f64>) -> Result<DMatrix<f64>> {
        (self.components)(p)
    }

    /// g_ij(p), checked for domain membership and positive definiteness.
    pub fn metric_at(&self, p: &DVector<f64>) -> Result<DMatrix<f64>> {
        self.check_point(p)?;
        let g = (self.components)(p)?;
        check_positive_definite(&g, p)?;
        Ok(g)
    }

    pub fn inner(&self, p: &DVector<f64>, u: &DVector<f64>, v: &DVector<f64>) -> Result<f64> {
        Ok((self.metric_at(p)? * v).dot(u))
    }

    pub fn norm(&self, p: &DVector<f64>, u: &DVector<f64>) -> Result<f64> {
        Ok(self.inner(p, u, u)?.max(0.0).sqrt())
    }

    fn steps(&self, p: &DVector<f64>) -> Vec<f64> {
        match self.mode {
            ChristoffelMode::FiniteDifference { step: Some(h) } => vec![h; self.dim],
            _ => p.iter().map(|x| fd_step(*x)).collect(),
        }
    }

    /// Christoffel symbols from central differences of g, whatever the mode.
    pub fn christoffel_fd(&self, p: &DVector<f64>) -> Result<Christoffel> {
        self.check_point(p)?;
        let steps = self.steps(p);
        self.christoffel_fd_with(p, &steps)
    }

    fn christoffel_fd_with(&self, p: &DVector<f64>, steps: &[f64]) -> Result<Christoffel> {
        let d = self.dim;
        let g = (self.components)(p)?;
        check_positive_definite(&g, p)?;
        let ginv = g.clone().try_inverse().ok_or_else(|| degenerate(&g, p))?;
        // dg[m] = ∂_m g
        let mut dg = Vec::with_capacity(d);
        for (m, &h) in steps.iter().enumerate() {
            // five-point central stencil on a power-of-two step, so p ± kh is exact
            let h = (2f64).powi(h.log2().round() as i32);
            let at = |k: f64| {
                let mut q = p.clone();
                q[m] += k * h;
                (self.components)(&q)
            };
            let (g2, g1, gm1, gm2) = (at(2.0)?, at(1.0)?, at(-1.0)?, at(-2.0)?);
            dg.push(((g1 - gm1) * 8.0 - (g2 - gm2)) / (12.0 * h));
        }
        Ok(levi_civita(&ginv, &dg))
    }

    /// Γᵏ_ij(p) in the metric's own mode.
    pub fn christoffel(&self, p: &DVector<f64>) -> Result<Christoffel> {
        match &self.mode {
            ChristoffelMode::Analytic(f) => {
                self.check_point(p)?;
                f(p)
            }
            ChristoffelMode::FiniteDifference { .. } => self.christoffel_fd(p),
        }
    }

    /// ∂_m Γ for every coordinate m.
    ///
    /// Analytic mode differences the closed form with a five-point stencil at the
    /// default step, which stays accurate where Γ varies on short scales (near a
    /// vacuum); finite-difference mode nests differences with the outer step √h.
    fn christoffel_derivatives(&self, p: &DVector<f64>) -> Result<Vec<Christoffel>> {
        let d = self.dim;
        let mut out = Vec::with_capacity(d);
        let inner = self.steps(p);
        for m in 0..d {
            let dm = match &self.mode {
                ChristoffelMode::Analytic(f) => {
                    let h = (2f64).powi(inner[m].log2().floor() as i32);
                    let at = |k: f64| {
                        let mut q = p.clone();
                        q[m] += k * h;
                        f(&q)
                    };
                    let (g2, g1, gm1, gm2) = (at(2.0)?, at(1.0)?, at(-1.0)?, at(-2.0)?);
                    let c = 1.0 / (12.0 * h);
                    g1.combine(&gm1, 8.0 * c, -8.0 * c).combine(&g2.combine(&gm2, c, -c), 1.0, -1.0)
                }
                ChristoffelMode::FiniteDifference { .. } => {
                    let h = inner[m].sqrt() * p[m].abs().max(1.0).sqrt();
                    let (pp, pm) = displaced(p, m, h);
                    let gp = self.christoffel_fd_with(&pp, &self.steps(&pp))?;
                    gp.combine(&self.christoffel_fd_with(&pm, &self.steps(&pm))?, 0.5 / h, -0.5 / h)
                }
            };
            out.push(dm);
        }
        Ok(out)
    }

    /// Components R^l_{kij} (first lower index contracted with the vector acted on).
    pub fn riemann_tensor(&self, p: &DVector<f64>) -> Result<Vec<f64>> {
        let d = self.dim;
        let gamma = self.christoffel(p)?;
        let dgamma = self.christoffel_derivatives(p)?;
        let idx = |l: usize, k: usize, i: usize, j: usize| ((l * d + k) * d + i) * d + j;
        let mut r = vec![0.0; d * d * d * d];
        for l in 0..d {
            for k in 0..d {
                for i in 0..d {
                    for j in 0..d {
                        if i == j {
                            continue;
                        }
                        let mut v = dgamma[i].get(l, j, k) - dgamma[j].get(l, i, k);
                        for m in 0..d {
                            v += gamma.get(l, i, m) * gamma.get(m, j, k) - gamma.get(l, j, m) * gamma.get(m, i, k);
                        }
                        r[idx(l, k, i, j)] = v;
                    }
                }
            }
        }
        Ok(r)
    }
}

fn displaced(p: &DVector<f64>, m: usize, h: f64) -> (DVector<f64>, DVector<f64>) {
    let mut pp = p.clone();
    let mut pm = p.clone();
    pp[m] += h;
    pm[m] -= h;
    (pp, pm)
}

fn degenerate(g: &DMatrix<f64>, p: &DVector<f64>) -> Error {
    Error::DegenerateMetric { point: p.iter().copied().collect(), det: g.determinant() }
}

fn check_positive_definite(g: &DMatrix<f64>, p: &DVector<f64>) -> Result<()> {
    if g.iter().any(|v| !v.is_finite()) {
        return Err(degenerate(g, p));
    }
    let scale = g.diagonal().iter().fold(0.0f64, |m, v| m.max(v.abs()));
    let chol = g.clone().cholesky().ok_or_else(|| degenerate(g, p))?;
    let dmin = chol.l().diagonal().iter().fold(f64::INFINITY, |m, v| m.min(*v));
    if !(dmin * dmin > 1e-14 * scale) {
        return Err(degenerate(g, p));
    }
    Ok(())
}

/// Γᵏ_ij = ½ g^{kl}(∂_i g_jl + ∂_j g_il − ∂_l g_ij).
fn levi_civita(ginv: &DMatrix<f64>, dg: &[DMatrix<f64>]) -> Christoffel {
    let d = ginv.nrows();
    let mut gamma = Christoffel::zeros(d);
    for k in 0..d {
        for i in 0..d {
            for j in i..d {
                let mut acc = 0.0;
                for l in 0..d {
                    acc += ginv[(k, l)] * (dg[i][(j, l)] + dg[j][(i, l)] - dg[l][(i, j)]);
                }
                gamma.set(k, i, j, 0.5 * acc);
            }
        }
    }
    gamma
}

/// Γᵏ_ij(p).
pub fn christoffel(metric: &MetricField, p: &DVector<f64>) -> Result<Christoffel> {
    metric.christoffel(p)
}

/// h = factor·g, with finite-difference Christoffels.
pub fn conformal_transform(
    metric: &MetricField,
    factor: impl Fn(&DVector<f64>) -> f64 + Send + Sync + 'static,
) -> MetricField {
    let base = metric.clone();
    let factor: ScalarFn = Arc::new(factor);
    MetricField {
        dim: metric.dim,
        components: Arc::new(move |p| {
            let f = factor(p);
            if !(f > 0.0) {
                return Err(Error::NonPositiveFactor { point: p.iter().copied().collect(), value: f });
            }
            Ok(base.raw_components(p)? * f)
        }),
        mode: ChristoffelMode::FiniteDifference { step: None },
        domain: metric.domain.clone(),
    }
}

/// h = factor·g with Christoffels assembled from those of g and ∇ln factor:
/// Γ̃ᵏ_ij = Γᵏ_ij + δᵏ_i ∂_jφ + δᵏ_j ∂_iφ − g_ij g^{kl} ∂_lφ, φ = ½ ln factor.
pub fn conformal_transform_with_gradient(
    metric: &MetricField,
    factor: impl Fn(&DVector<f64>) -> f64 + Send + Sync + 'static,
    factor_gradient: impl Fn(&DVector<f64>) -> DVector<f64> + Send + Sync + 'static,
) -> MetricField {
    let factor: ScalarFn = Arc::new(factor);
    let grad: VectorFn = Arc::new(factor_gradient);
    let f2 = factor.clone();
    let h = conformal_transform(metric, move |p| f2(p));
    let base = metric.clone();
    h.with_christoffels(move |p| {
        let f = factor(p);
        if !(f > 0.0) {
            return Err(Error::NonPositiveFactor { point: p.iter().copied().collect(), value: f });
        }
        let dphi = grad(p) / (2.0 * f);
        let g = base.metric_at(p)?;
        let ginv = g.clone().try_inverse().ok_or_else(|| degenerate(&g, p))?;
        let up = &ginv * &dphi;
        let gamma = base.christoffel(p)?;
        let d = base.dim();
        let mut out = Christoffel::zeros(d);
        for k in 0..d {
            for i in 0..d {
                for j in i..d {
                    let mut v = gamma.get(k, i, j) - g[(i, j)] * up[k];
                    if k == i {
                        v += dphi[j];
                    }
                    if k == j {
                        v += dphi[i];
                    }
                    out.set(k, i, j, v);
                }
            }
        }
        Ok(out)
    })
}

/// DV/dτ along a sampled curve.
pub fn covariant_derivative_along(
    metric: &MetricField,
    path: &PathSample,
    field: &[DVector<f64>],
) -> Result<Vec<DVector<f64>>> {
    if field.len() != path.len() {
        return Err(Error::GridMismatch { expected: path.len(), found: field.len() });
    }
    let dv = grid::derivative_vec(&path.grid, field)?;
    let mut out = Vec::with_capacity(field.len());
    for ((p, t), (v, d)) in path.points.iter().zip(&path.tangents).zip(field.iter().zip(dv)) {
        let gamma = metric.christoffel(p)?;
        out.push(d + gamma.contract(t, v));
    }
    Ok(out)
}

/// R(u,v)u in the geodesic-deviation sense: for orthonormal u, v on a surface
/// of Gaussian curvature K the result is K·v.
pub fn curvature_operator(
    metric: &MetricField,
    p: &DVector<f64>,
    u: &DVector<f64>,
    v: &DVector<f64>,
) -> Result<DVector<f64>> {
    let d = metric.dim();
    let r = metric.riemann_tensor(p)?;
    let idx = |l: usize, k: usize, i: usize, j: usize| ((l * d + k) * d + i) * d + j;
    let mut out = DVector::zeros(d);
    for l in 0..d {
        let mut acc = 0.0;
        for k in 0..d {
            for i in 0..d {
                for j in (i + 1)..d {
                    // pairing the antisymmetric slots keeps R(u,u)u exactly zero
                    acc += r[idx(l, k, i, j)] * (v[i] * u[j] - v[j] * u[i]) * u[k];
                }
            }
        }
        out[l] = acc;
    }
    Ok(out)
}

pub(crate) fn geodesic_rhs(metric: &MetricField, y: &DVector<f64>) -> Option<DVector<f64>> {
    let d = metric.dim();
    let x = y.rows(0, d).into_owned();
    let v = y.rows(d, d).into_owned();
    let gamma = metric.christoffel(&x).ok()?;
    let a = -gamma.contract(&v, &v);
    let mut out = DVector::zeros(2 * d);
    out.rows_mut(0, d).copy_from(&v);
    out.rows_mut(d, d).copy_from(&a);
    Some(out)
}

/// Split an integrator state history into a [`PathSample`]; grids come back increasing.
pub(crate) fn states_to_path(
    kind: ParameterKind,
    dim: usize,
    mut t: Vec<f64>,
    mut y: Vec<DVector<f64>>,
    energy: impl Fn(&DVector<f64>, &DVector<f64>) -> f64,
) -> PathSample {
    if t.len() > 1 && t[1] < t[0] {
        t.reverse();
        y.reverse();
    }
    let points: Vec<DVector<f64>> = y.iter().map(|s| s.rows(0, dim).into_owned()).collect();
    let tangents: Vec<DVector<f64>> = y.iter().map(|s| s.rows(dim, dim).into_owned()).collect();
    let energies = points.iter().zip(&tangents).map(|(p, v)| energy(p, v)).collect();
    PathSample { kind, grid: t, points, tangents, energies, energy_drift: None }
}

fn kinetic(metric: &MetricField) -> impl Fn(&DVector<f64>, &DVector<f64>) -> f64 + '_ {
    move |p, v| metric.inner(p, v, v).map(|x| 0.5 * x).unwrap_or(f64::NAN)
}

fn geodesic_state(metric: &MetricField, p0: &DVector<f64>, v0: &DVector<f64>) -> Result<DVector<f64>> {
    metric.metric_at(p0)?;
    if v0.len() != metric.dim() {
        return Err(Error::InvalidInput("velocity dimension mismatch".into()));
    }
    let d = metric.dim();
    let mut y0 = DVector::zeros(2 * d);
    y0.rows_mut(0, d).copy_from(p0);
    y0.rows_mut(d, d).copy_from(v0);
    Ok(y0)
}

/// Integrate ẍᵏ + Γᵏ_ij ẋⁱẋʲ = 0 over `span = (s0, s1)` with adaptive output.
pub fn integrate_geodesic(
    metric: &MetricField,
    p0: &DVector<f64>,
    v0: &DVector<f64>,
    span: (f64, f64),
    tol: f64,
) -> Result<PathSample> {
    check_tol(tol)?;
    let y0 = geodesic_state(metric, p0, v0)?;
    let d = metric.dim();
    let sol = ode::integrate(
        |_, y| geodesic_rhs(metric, y),
        |y| metric.domain().contains(&y.rows(0, d).into_owned()),
        span.0,
        span.1,
        &y0,
        &OdeOptions::with_tol(tol),
        ode::Output::Steps,
    );
    finish(sol.stop, states_to_path(ParameterKind::ArcLength, d, sol.t, sol.y, kinetic(metric)))
}

/// Geodesic through `p0` with velocity `v0` at parameter `s0`, sampled on `grid`
/// (which may extend on both sides of `s0`).
pub fn integrate_geodesic_on_grid(
    metric: &MetricField,
    p0: &DVector<f64>,
    v0: &DVector<f64>,
    s0: f64,
    grid: &[f64],
    tol: f64,
) -> Result<PathSample> {
    check_tol(tol)?;
    let y0 = geodesic_state(metric, p0, v0)?;
    let d = metric.dim();
    let sol = ode::integrate_through(
        |_, y| geodesic_rhs(metric, y),
        |y| metric.domain().contains(&y.rows(0, d).into_owned()),
        s0,
        &y0,
        grid,
        &OdeOptions::with_tol(tol),
    )?;
    finish(sol.stop, states_to_path(ParameterKind::ArcLength, d, sol.t, sol.y, kinetic(metric)))
}

pub(crate) fn finish(stop: ode::Stop, path: PathSample) -> Result<PathSample> {
    match stop {
        ode::Stop::Completed => Ok(path),
        ode::Stop::Exited(exit) => Err(Error::LeftDomain { exit, partial: Box::new(path) }),
        ode::Stop::Underflow { at, floor } => Err(Error::StepUnderflow { at, floor }),
    }
}

pub(crate) fn check_tol(tol: f64) -> Result<()> {
    if !(tol > 0.0 && tol.is_finite()) {
        return Err(Error::InvalidInput(format!("tolerance must be positive, got {tol}")));
    }
    Ok(())
}

/// Max metric norm of Dγ'/dτ over the samples.
pub fn geodesic_residual(metric: &MetricField, path: &PathSample) -> Result<f64> {
    let acc = covariant_derivative_along(metric, path, &path.tangents)?;
    let mut worst: f64 = 0.0;
    for (p, a) in path.points.iter().zip(&acc) {
        worst = worst.max(metric.norm(p, a)?);
    }
    Ok(worst)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use std::f64::consts::PI;

    fn v2(a: f64, b: f64) -> DVector<f64> {
        DVector::from_vec(vec![a, b])
    }

    /// A non-trivial metric with no closed-form Christoffels supplied.
    fn warped() -> MetricField {
        MetricField::new(2, |p| {
            let a = 1.0 + 0.3 * p[0] * p[0] + 0.1 * p[1];
            let b = 2.0 + (p[0] * p[1]).sin() * 0.5;
            let c = 0.2 * p[0];
            DMatrix::from_row_slice(2, 2, &[a, c, c, b])
        })
    }

    #[test]
    fn flat_christoffels_vanish() {
        let g = MetricField::euclidean(3);
        let p = DVector::from_vec(vec![0.3, -1.0, 2.0]);
        assert_eq!(christoffel(&g, &p).unwrap().max_abs(), 0.0);
        assert!(g.clone().finite_difference().christoffel(&p).unwrap().max_abs() < 1e-12);
    }

    #[test]
    fn sphere_analytic_matches_fd() {
        let s = MetricField::round_sphere();
        let p = v2(1.1, 0.4);
        let a = s.christoffel(&p).unwrap();
        let f = s.christoffel_fd(&p).unwrap();
        let h = fd_step(1.1);
        assert!(a.max_abs_diff(&f) < 10.0 * h * h, "{}", a.max_abs_diff(&f));
    }

    #[test]
    fn sphere_sectional_curvature_is_one() {
        let s = MetricField::round_sphere();
        let p = v2(0.9, 2.0);
        let sin = p[0].sin();
        let u = v2(1.0, 0.0);
        let v = v2(0.0, 1.0 / sin);
        let r = curvature_operator(&s, &p, &u, &v).unwrap();
        assert_abs_diff_eq!(r[0], v[0], epsilon = 1e-7);
        assert_abs_diff_eq!(r[1], v[1], epsilon = 1e-7);
        let fd = s.clone().finite_difference();
        let r = curvature_operator(&fd, &p, &u, &v).unwrap();
        assert_abs_diff_eq!(r[1], v[1], epsilon = 1e-4);
    }

    #[test]
    fn curvature_vanishes_for_parallel_arguments_in_analytic_mode() {
        let s = MetricField::round_sphere();
        let p = v2(0.7, 0.1);
        let u = v2(0.3, -1.7);
        assert_eq!(curvature_operator(&s, &p, &u, &u).unwrap(), DVector::zeros(2));
        let w = &u * 2.0;
        assert_eq!(curvature_operator(&s, &p, &u, &w).unwrap(), DVector::zeros(2));
    }

    #[test]
    fn flat_curvature_is_zero() {
        let g = MetricField::euclidean(2);
        let r = curvature_operator(&g, &v2(1.0, 2.0), &v2(1.0, 0.5), &v2(-0.2, 1.0)).unwrap();
        assert!(r.norm() < 1e-14);
    }

    #[test]
    fn out_of_domain_is_reported() {
        let s = MetricField::round_sphere();
        assert!(matches!(s.christoffel(&v2(-0.1, 0.0)), Err(Error::OutOfDomain(_))));
    }

    #[test]
    fn degenerate_metric_is_reported() {
        let g = MetricField::new(2, |p| DMatrix::from_diagonal(&DVector::from_vec(vec![1.0, p[0]])));
        assert!(matches!(g.christoffel(&v2(0.0, 0.0)), Err(Error::DegenerateMetric { .. })));
    }

    #[test]
    fn identity_conformal_factor() {
        let g = warped();
        let h = conformal_transform(&g, |_| 1.0);
        let p = v2(0.4, 0.2);
        assert_eq!(h.metric_at(&p).unwrap(), g.metric_at(&p).unwrap());
    }

    #[test]
    fn non_positive_factor_is_reported() {
        let h = conformal_transform(&MetricField::euclidean(2), |p| p[0]);
        assert!(matches!(h.metric_at(&v2(-1.0, 0.0)), Err(Error::NonPositiveFactor { .. })));
    }

    #[test]
    fn analytic_conformal_christoffels_match_fd() {
        let g = MetricField::round_sphere();
        let f = |p: &DVector<f64>| 1.5 + p[0].cos() * p[1].sin();
        let df = |p: &DVector<f64>| v2(-p[0].sin() * p[1].sin(), p[0].cos() * p[1].cos());
        let h = conformal_transform_with_gradient(&g, f, df);
        let p = v2(1.2, 0.8);
        let d = h.christoffel(&p).unwrap().max_abs_diff(&h.christoffel_fd(&p).unwrap());
        assert!(d < 1e-8, "{d}");
    }

    #[test]
    fn covariant_derivative_of_constant_field_in_flat_space() {
        let g = MetricField::euclidean(2);
        let grid = grid::linspace(0.0, 1.0, 21);
        let pts = grid.iter().map(|t| v2(t.sin(), t * t)).collect();
        let path = PathSample::from_points(ParameterKind::Time, grid, pts).unwrap();
        let field = vec![v2(1.0, -2.0); path.len()];
        for d in covariant_derivative_along(&g, &path, &field).unwrap() {
            assert!(d.norm() < 1e-12);
        }
        assert!(matches!(
            covariant_derivative_along(&g, &path, &field[1..]),
            Err(Error::GridMismatch { .. })
        ));
    }

    #[test]
    fn straight_line_geodesic() {
        let g = MetricField::euclidean(2);
        let path = integrate_geodesic(&g, &v2(0.0, 0.0), &v2(1.0, 0.0), (0.0, 1.0), 1e-10).unwrap();
        let end = path.points.last().unwrap();
        assert_abs_diff_eq!(end[0], 1.0, epsilon = 1e-12);
        assert_abs_diff_eq!(end[1], 0.0, epsilon = 1e-12);
    }

    #[test]
    fn great_circle_closes() {
        let s = MetricField::round_sphere();
        let p0 = v2(PI / 2.0, 0.3);
        let a: f64 = 0.5;
        let v0 = v2(a.sin(), a.cos());
        let tol = 1e-10;
        let path = integrate_geodesic(&s, &p0, &v0, (0.0, 2.0 * PI), tol).unwrap();
        let end = path.points.last().unwrap();
        // the azimuth winds once around
        let gap = ((end[0] - p0[0]).powi(2) + (end[1] - p0[1] - 2.0 * PI).powi(2)).sqrt();
        assert!(gap < 1e3 * tol, "{gap}");
        let speeds: Vec<f64> = path.points.iter().zip(&path.tangents).map(|(p, v)| s.norm(p, v).unwrap()).collect();
        let mean = speeds.iter().sum::<f64>() / speeds.len() as f64;
        assert!(speeds.iter().all(|v| (v - mean).abs() <= 10.0 * tol * mean));
    }

    #[test]
    fn geodesic_leaving_chart_returns_partial_path() {
        let s = MetricField::round_sphere();
        match integrate_geodesic(&s, &v2(1.0, 0.0), &v2(-1.0, 0.0), (0.0, 2.0), 1e-9) {
            Err(Error::LeftDomain { exit, partial }) => {
                assert!(exit > 0.99 && exit < 1.0, "{exit}");
                assert!(partial.points.iter().all(|p| p[0] > 0.0));
            }
            other => panic!("unexpected {:?}", other.map(|p| p.len())),
        }
    }
}
