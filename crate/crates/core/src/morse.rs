//! Jacobi fields from families of extremals, conjugate points and Morse bookkeeping.

use std::sync::Arc;

use nalgebra::DVector;
use rayon::prelude::*;

use crate::dynamics::NaturalSystem;
use crate::error::{Error, Result};
use crate::path::{ParameterKind, PathSample};
use crate::riemann::{covariant_derivative_along, curvature_operator, MetricField};
use crate::series::FormalSeries;

pub type MemberFn = Arc<dyn Fn(f64, &[f64]) -> Result<Vec<DVector<f64>>> + Send + Sync>;
pub type MemberResidualFn = Arc<dyn Fn(f64, &[f64], &[DVector<f64>]) -> Result<f64> + Send + Sync>;

/// A one-parameter family of extremals γ(τ; a) sampled on caller-chosen grids.
#[derive(Clone)]
pub struct SolutionFamily {
    generator: MemberFn,
    kind: ParameterKind,
    a_domain: (f64, f64),
    periodic: bool,
    a_scale: f64,
    residual: Option<(MemberResidualFn, f64)>,
}

impl SolutionFamily {
    /// Family over the whole real line with unit a-scale.
    pub fn new(
        kind: ParameterKind,
        generator: impl Fn(f64, &[f64]) -> Result<Vec<DVector<f64>>> + Send + Sync + 'static,
    ) -> Self {
        SolutionFamily {
            generator: Arc::new(generator),
            kind,
            a_domain: (f64::NEG_INFINITY, f64::INFINITY),
            periodic: false,
            a_scale: 1.0,
            residual: None,
        }
    }

    pub fn with_domain(mut self, lo: f64, hi: f64) -> Self {
        self.a_domain = (lo, hi);
        self
    }

    /// The domain wraps around; any a is admissible.
    pub fn periodic(mut self) -> Self {
        self.periodic = true;
        self
    }

    pub fn with_scale(mut self, scale: f64) -> Self {
        self.a_scale = scale;
        self
    }

    /// Every sampled member must have `residual(a, grid, points) ≤ tolerance`.
    pub fn with_residual_check(
        mut self,
        residual: impl Fn(f64, &[f64], &[DVector<f64>]) -> Result<f64> + Send + Sync + 'static,
        tolerance: f64,
    ) -> Self {
        self.residual = Some((Arc::new(residual), tolerance));
        self
    }

    pub fn kind(&self) -> ParameterKind {
        self.kind
    }

    pub fn a_domain(&self) -> (f64, f64) {
        self.a_domain
    }

    /// Central-difference step in a.
    pub fn step(&self) -> f64 {
        1e-4 * self.a_scale.abs()
    }

    pub fn member(&self, a: f64, grid: &[f64]) -> Result<Vec<DVector<f64>>> {
        let pts = (self.generator)(a, grid)?;
        if pts.len() != grid.len() {
            return Err(Error::GridMismatch { expected: grid.len(), found: pts.len() });
        }
        Ok(pts)
    }

    pub fn member_path(&self, a: f64, grid: &[f64]) -> Result<PathSample> {
        PathSample::from_points(self.kind, grid.to_vec(), self.member(a, grid)?)
    }

    fn checked_member(&self, a: f64, grid: &[f64]) -> Result<Vec<DVector<f64>>> {
        let pts = self.member(a, grid)?;
        if let Some((check, tol)) = &self.residual {
            let r = check(a, grid, &pts)?;
            if !(r <= *tol) {
                return Err(Error::FamilyResidual { a, residual: r });
            }
        }
        Ok(pts)
    }
}

/// ∂γ/∂a at a₀: central differences at h and h/2 combined by one Richardson pass.
pub fn jacobi_field_from_family(family: &SolutionFamily, a0: f64, grid: &[f64]) -> Result<Vec<DVector<f64>>> {
    let h = family.step();
    let (lo, hi) = family.a_domain;
    if !family.periodic && !(a0 - h > lo && a0 + h < hi) {
        return Err(Error::OutOfRange { value: a0, lo, hi });
    }
    let offsets = [-h, -0.5 * h, 0.5 * h, h];
    let members: Vec<Vec<DVector<f64>>> =
        offsets.par_iter().map(|d| family.checked_member(a0 + d, grid)).collect::<Result<_>>()?;
    if family.residual.is_some() {
        family.checked_member(a0, grid)?;
    }
    let out = (0..grid.len())
        .map(|i| {
            let wide = (&members[3][i] - &members[0][i]) / (2.0 * h);
            let narrow = (&members[2][i] - &members[1][i]) / h;
            (narrow * 4.0 - wide) / 3.0
        })
        .collect();
    Ok(out)
}

/// max over interior samples of ‖D²J + R(J, γ′)γ′‖, skipping two samples at each end.
pub fn jacobi_equation_residual(metric: &MetricField, geodesic: &PathSample, field: &[DVector<f64>]) -> Result<f64> {
    let (d2, n) = second_covariant(metric, geodesic, field)?;
    let mut worst = 0.0f64;
    for i in 2..n.saturating_sub(2) {
        let p = &geodesic.points[i];
        let r = &d2[i] + curvature_operator(metric, p, &geodesic.tangents[i], &field[i])?;
        worst = worst.max(metric.norm(p, &r)?);
    }
    Ok(worst)
}

/// Same for the Newton linearisation D²J + R(J, γ̇)γ̇ + ∇_J grad U.
pub fn newton_jacobi_residual(system: &NaturalSystem, path: &PathSample, field: &[DVector<f64>]) -> Result<f64> {
    let metric = system.metric();
    let (d2, n) = second_covariant(metric, path, field)?;
    let mut worst = 0.0f64;
    for i in 2..n.saturating_sub(2) {
        let p = &path.points[i];
        let ginv = metric.metric_at(p)?.try_inverse().ok_or(Error::DegenerateMetric { point: p.iter().copied().collect(), det: 0.0 })?;
        let hess = ginv * system.covariant_hessian(p)? * &field[i];
        let r = &d2[i] + curvature_operator(metric, p, &path.tangents[i], &field[i])? + hess;
        worst = worst.max(metric.norm(p, &r)?);
    }
    Ok(worst)
}

fn second_covariant(metric: &MetricField, path: &PathSample, field: &[DVector<f64>]) -> Result<(Vec<DVector<f64>>, usize)> {
    if field.len() != path.len() {
        return Err(Error::GridMismatch { expected: path.len(), found: field.len() });
    }
    let d1 = covariant_derivative_along(metric, path, field)?;
    Ok((covariant_derivative_along(metric, path, &d1)?, path.len()))
}

/// j = ⟨J, n⟩ for the unit normal n of a curve on a surface; zero wherever J is exactly zero.
pub fn orthogonal_amplitude(metric: &MetricField, path: &PathSample, field: &[DVector<f64>]) -> Result<Vec<f64>> {
    if metric.dim() != 2 {
        return Err(Error::Unsupported(format!("orthogonal amplitude needs dimension 2, got {}", metric.dim())));
    }
    if field.len() != path.len() {
        return Err(Error::GridMismatch { expected: path.len(), found: field.len() });
    }
    let mut out = Vec::with_capacity(field.len());
    for (i, ((p, t), j)) in path.points.iter().zip(&path.tangents).zip(field).enumerate() {
        if j.iter().all(|x| *x == 0.0) {
            out.push(0.0);
            continue;
        }
        let g = metric.metric_at(p)?;
        let tt = (t.transpose() * &g * t)[0];
        if !(tt > 0.0) {
            return Err(Error::ZeroTangent(i));
        }
        let e = DVector::from_vec(vec![-t[1], t[0]]);
        let n = &e - t * ((t.transpose() * &g * &e)[0] / tt);
        let nn = (n.transpose() * &g * &n)[0].sqrt();
        out.push((j.transpose() * &g * &n)[0] / nn);
    }
    Ok(out)
}

#[derive(Clone, Debug, PartialEq)]
pub struct ConjugatePointRecord {
    pub parameter_value: f64,
    pub multiplicity: u32,
    /// min(|j| at the bracket ends) as a fraction of max |j|.
    pub detection_margin: f64,
}

#[derive(Clone, Copy, Debug)]
pub struct ConjugateOptions {
    /// |j| at or below `noise_floor · max|j|` counts as zero.
    pub noise_floor: f64,
    /// NoisyAmplitude once this fraction of the window sits at the floor.
    pub noisy_fraction: f64,
    /// Parameter tolerance of the bisection refinement.
    pub refine_tolerance: f64,
}

impl Default for ConjugateOptions {
    fn default() -> Self {
        ConjugateOptions { noise_floor: 1e-9, noisy_fraction: 0.5, refine_tolerance: 1e-8 }
    }
}

#[derive(Clone, Debug)]
pub struct ConjugateReport {
    pub records: Vec<ConjugatePointRecord>,
    /// Touching zeros without a sign change.
    pub warnings: Vec<String>,
    pub amplitude: Vec<f64>,
}

/// 1% of the parameter span.
pub fn default_base_exclusion(path: &PathSample) -> f64 {
    let (a, b) = path.span();
    0.01 * (b - a)
}

pub fn conjugate_points(
    metric: &MetricField,
    geodesic: &PathSample,
    field: &[DVector<f64>],
    base_exclusion: f64,
) -> Result<Vec<ConjugatePointRecord>> {
    Ok(conjugate_points_detailed(metric, geodesic, field, base_exclusion, &ConjugateOptions::default())?.records)
}

pub fn conjugate_points_detailed(
    metric: &MetricField,
    geodesic: &PathSample,
    field: &[DVector<f64>],
    base_exclusion: f64,
    opts: &ConjugateOptions,
) -> Result<ConjugateReport> {
    let amp = orthogonal_amplitude(metric, geodesic, field)?;
    let grid = &geodesic.grid;
    let scale = amp.iter().fold(0.0f64, |m, x| m.max(x.abs()));
    if !(scale > 0.0) || !scale.is_finite() {
        return Err(Error::NoisyAmplitude { fraction: 1.0 });
    }
    let floor = opts.noise_floor * scale;
    let start = grid.first().copied().unwrap_or(0.0) + base_exclusion;
    let window: Vec<usize> = (0..amp.len()).filter(|&i| grid[i] >= start).collect();
    let quiet = window.iter().filter(|&&i| amp[i].abs() <= floor).count();
    let fraction = if window.is_empty() { 1.0 } else { quiet as f64 / window.len() as f64 };
    if fraction > opts.noisy_fraction {
        return Err(Error::NoisyAmplitude { fraction });
    }

    let sign = |i: usize| if amp[i] > floor { 1 } else if amp[i] < -floor { -1 } else { 0 };
    let mut records = Vec::new();
    let mut warnings = Vec::new();
    let mut last: Option<usize> = None;
    for &k in &window {
        let sk = sign(k);
        if sk == 0 {
            continue;
        }
        if let Some(i) = last {
            let si = sign(i);
            if si != sk {
                let tau = refine_root(grid, &amp, i, k, opts.refine_tolerance);
                records.push(ConjugatePointRecord {
                    parameter_value: tau,
                    multiplicity: 1,
                    detection_margin: amp[i].abs().min(amp[k].abs()) / scale,
                });
            } else if k > i + 1 {
                warnings.push(format!(
                    "amplitude touches zero without changing sign on [{}, {}]",
                    grid[i], grid[k]
                ));
            }
        }
        last = Some(k);
    }
    Ok(ConjugateReport { records, warnings, amplitude: amp })
}

/// Bisection on the cubic Lagrange interpolant through four samples around the bracket.
fn refine_root(grid: &[f64], amp: &[f64], i: usize, k: usize, tol: f64) -> f64 {
    // an exact zero inside the bracket is already the answer
    if let Some(z) = (i + 1..k).find(|&m| amp[m] == 0.0) {
        if k - i == 2 {
            return grid[z];
        }
    }
    let n = grid.len();
    let lo = i.saturating_sub(1);
    let lo = lo.min(n.saturating_sub(4));
    let idx: Vec<usize> = (lo..(lo + 4).min(n)).collect();
    let interp = |x: f64| -> f64 {
        let mut acc = 0.0;
        for &a in &idx {
            let mut w = amp[a];
            for &b in &idx {
                if a != b {
                    w *= (x - grid[b]) / (grid[a] - grid[b]);
                }
            }
            acc += w;
        }
        acc
    };
    // the interpolant only spans a short window; a wide zero run falls back to linear
    let (mut a, mut b) = (grid[i], grid[k]);
    let (fa, fb) = (interp(a), interp(b));
    if k - i > 2 || fa.signum() == fb.signum() {
        let t = amp[i] / (amp[i] - amp[k]);
        return grid[i] + t * (grid[k] - grid[i]);
    }
    let mut fa = fa;
    while b - a > tol {
        let m = 0.5 * (a + b);
        let fm = interp(m);
        if fm == 0.0 {
            return m;
        }
        if fm.signum() == fa.signum() {
            a = m;
            fa = fm;
        } else {
            b = m;
        }
    }
    0.5 * (a + b)
}

/// Point of `path` at a record's parameter; falls back to linear interpolation
/// where the tangents are not finite.
pub fn record_location(path: &PathSample, record: &ConjugatePointRecord) -> DVector<f64> {
    let tau = record.parameter_value;
    if let Some(i) = path.grid.iter().position(|g| (g - tau).abs() <= 1e-12 * (1.0 + tau.abs())) {
        return path.points[i].clone();
    }
    let p = path.point_at(tau);
    if p.iter().all(|x| x.is_finite()) {
        return p;
    }
    let i = crate::grid::locate(&path.grid, tau);
    let w = (tau - path.grid[i]) / (path.grid[i + 1] - path.grid[i]);
    &path.points[i] * (1.0 - w) + &path.points[i + 1] * w
}

/// Sum of multiplicities.
pub fn morse_index(records: &[ConjugatePointRecord]) -> usize {
    records.iter().map(|r| r.multiplicity as usize).sum()
}

/// Σ P_t(N_c)·t^{μ(N_c)}, truncated at `truncation`.
pub fn morse_series(contributions: &[(FormalSeries, usize)], truncation: usize) -> Result<FormalSeries> {
    let mut out = FormalSeries::zero(truncation);
    for (p, index) in contributions {
        let p = FormalSeries::new(p.coefficients().to_vec(), truncation);
        out = out.try_add(&p.shift(*index))?;
    }
    Ok(out)
}

/// Morse series of the loops through D on the separatrix sector, through depth d:
/// the constant loop contributes 1, and the circle of m-fold separatrix loops
/// (index 2m − 1) contributes t^{2m−1}(1 + t) for m = 1..=d+1. Truncated at t^{2d+1}.
pub fn separatrix_morse_series(depth: usize) -> Result<FormalSeries> {
    let n = 2 * depth + 1;
    let circle = FormalSeries::new(vec![1, 1], n);
    let mut c = vec![(FormalSeries::one(n), 0)];
    c.extend((1..=depth + 1).map(|m| (circle.clone(), 2 * m - 1)));
    morse_series(&c, n)
}

/// Stored Poincaré series: n = 2 → 1/(1−t), n = 3 → 1/(1−t²).
pub fn poincare_series_loop_sphere(n: usize, truncation: usize) -> Result<FormalSeries> {
    match n {
        2 => FormalSeries::geometric(1, truncation),
        3 => FormalSeries::geometric(2, truncation),
        _ => Err(Error::Unsupported(format!("Poincare series stored only for n = 2, 3 (got {n})"))),
    }
}

/// Morse inequality M_t ≥ P_t coefficientwise.
pub fn morse_inequality_check(morse: &FormalSeries, poincare: &FormalSeries) -> Result<bool> {
    morse.dominates(poincare)
}
