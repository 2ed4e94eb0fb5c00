//! Second-variation quadratic forms along extremals and the identities that
//! relate the action Hessian to the Jacobi-metric length and energy Hessians.
//!
//! Every form is evaluated in first-derivative form,
//! `δ²S = ∫ |DV/dt|² − ⟨R(γ̇,V)γ̇, V⟩ − ∇²U(V,V) dt`, by mapped Simpson
//! quadrature on the path's own grid. The same evaluation on the half grid
//! gives the reported discretisation estimate.

use nalgebra::DVector;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::dynamics::{self, NaturalSystem};
use crate::error::{Error, Result};
use crate::grid;
use crate::path::{ParameterKind, PathSample};
use crate::riemann::{self, covariant_derivative_along, curvature_operator, MetricField};

/// Normalisation of the Jacobi force Fᴶ = c · gradₕ ln 2(i₁ − U),
/// fixed by [`calibrate_jacobi_force_scale`].
pub const JACOBI_FORCE_SCALE: f64 = 1.0;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum VariationKind {
    General,
    Orthogonal,
}

/// A proper variation: vector samples along a path, zero at both ends.
#[derive(Clone, Debug)]
pub struct VariationField {
    pub values: Vec<DVector<f64>>,
    pub kind: VariationKind,
}

impl VariationField {
    pub fn new(path: &PathSample, values: Vec<DVector<f64>>) -> Result<Self> {
        if values.len() != path.len() {
            return Err(Error::GridMismatch { expected: path.len(), found: values.len() });
        }
        Ok(VariationField { values, kind: VariationKind::General })
    }

    pub fn zero(path: &PathSample) -> Self {
        VariationField { values: vec![DVector::zeros(path.dim()); path.len()], kind: VariationKind::General }
    }

    pub fn scaled(&self, alpha: f64) -> Self {
        VariationField { values: self.values.iter().map(|v| v * alpha).collect(), kind: self.kind }
    }

    /// Largest endpoint norm (zero for a proper variation).
    pub fn endpoint_norm(&self) -> f64 {
        match (self.values.first(), self.values.last()) {
            (Some(a), Some(b)) => a.norm().max(b.norm()),
            _ => 0.0,
        }
    }

    pub fn max_norm(&self) -> f64 {
        self.values.iter().fold(0.0, |m, v| m.max(v.norm()))
    }
}

/// Value of a quadratic form together with its half-grid discrepancy.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct QuadraticFormReport {
    pub value: f64,
    pub discretization_estimate: f64,
}

/// Both sides of an identity between quadratic forms.
#[derive(Clone, Copy, Debug)]
pub struct IdentityCheck {
    /// The form on the left (δ²S₀ᴶ, δ²Lᴶ or δ²S restricted to V⊥).
    pub lhs: f64,
    /// The form it is compared with.
    pub rhs: f64,
    pub correction: f64,
    /// |lhs − rhs − correction|.
    pub residual: f64,
    /// max(|lhs|, |rhs|, 1).
    pub scale: f64,
    pub discretization_estimate: f64,
}

impl IdentityCheck {
    pub fn relative(&self) -> f64 {
        self.residual / self.scale
    }

    fn new(lhs: QuadraticFormReport, rhs: QuadraticFormReport, correction: QuadraticFormReport) -> Self {
        let residual = (lhs.value - rhs.value - correction.value).abs();
        IdentityCheck {
            lhs: lhs.value,
            rhs: rhs.value,
            correction: correction.value,
            residual,
            scale: lhs.value.abs().max(rhs.value.abs()).max(1.0),
            discretization_estimate: lhs.discretization_estimate
                + rhs.discretization_estimate
                + correction.discretization_estimate,
        }
    }
}

/// Knobs shared by all forms.
#[derive(Clone, Copy, Debug)]
pub struct VariationOptions {
    /// Extremal residual admitted, relative to max(1, largest acceleration).
    pub extremal_tolerance: f64,
    /// Endpoint norm admitted, relative to max(1, largest |V|).
    pub endpoint_tolerance: f64,
}

impl Default for VariationOptions {
    fn default() -> Self {
        VariationOptions { extremal_tolerance: 1e-3, endpoint_tolerance: 1e-12 }
    }
}

fn check_proper(v: &VariationField, opts: &VariationOptions) -> Result<()> {
    let e = v.endpoint_norm();
    if e > opts.endpoint_tolerance * v.max_norm().max(1.0) {
        return Err(Error::ImproperVariation(e));
    }
    Ok(())
}

fn check_len(path: &PathSample, v: &VariationField) -> Result<()> {
    if v.values.len() != path.len() {
        return Err(Error::GridMismatch { expected: path.len(), found: v.values.len() });
    }
    Ok(())
}

fn check_kind(path: &PathSample, kind: ParameterKind) -> Result<()> {
    if path.kind != kind {
        return Err(Error::InvalidInput(format!("expected a {kind:?}-parametrised path, got {:?}", path.kind)));
    }
    Ok(())
}

fn check_newton_extremal(system: &NaturalSystem, path: &PathSample, opts: &VariationOptions) -> Result<()> {
    let acc = covariant_derivative_along(system.metric(), path, &path.tangents)?;
    let mut worst: f64 = 0.0;
    let mut scale: f64 = 1.0;
    for (p, a) in path.points.iter().zip(&acc) {
        let r = a + system.gradient(p)?;
        worst = worst.max(system.metric().norm(p, &r)?);
        scale = scale.max(system.metric().norm(p, a)?);
    }
    let tolerance = opts.extremal_tolerance * scale;
    if !(worst <= tolerance) {
        return Err(Error::NotAnExtremal { residual: worst, tolerance });
    }
    Ok(())
}

fn check_geodesic(metric: &MetricField, path: &PathSample, opts: &VariationOptions) -> Result<()> {
    let residual = riemann::geodesic_residual(metric, path)?;
    // relative to the coordinate acceleration, which the Christoffel term balances
    let acc = grid::derivative_vec(&path.grid, &path.tangents)?;
    let mut scale: f64 = 1.0;
    for ((p, t), a) in path.points.iter().zip(&path.tangents).zip(&acc) {
        scale = scale.max(metric.inner(p, t, t)?).max(metric.norm(p, a)?);
    }
    let tolerance = opts.extremal_tolerance * scale;
    if !(residual <= tolerance) {
        return Err(Error::NotAnExtremal { residual, tolerance });
    }
    Ok(())
}

/// Samples handed to a form's pointwise density.
struct Local<'a> {
    path: &'a PathSample,
    v: &'a [DVector<f64>],
    dv: &'a [DVector<f64>],
    /// Dγ̇/dτ, only when requested.
    acc: &'a [DVector<f64>],
}

/// Integrate a pointwise density on the grid and on the half grid.
fn form<F>(
    metric: &MetricField,
    path: &PathSample,
    values: &[DVector<f64>],
    need_acc: bool,
    density: F,
) -> Result<QuadraticFormReport>
where
    F: Fn(usize, &Local<'_>) -> Result<f64>,
{
    let eval = |path: &PathSample, values: &[DVector<f64>]| -> Result<f64> {
        let dv = covariant_derivative_along(metric, path, values)?;
        let acc = if need_acc { covariant_derivative_along(metric, path, &path.tangents)? } else { Vec::new() };
        let local = Local { path, v: values, dv: &dv, acc: &acc };
        let dens = (0..path.len()).map(|i| density(i, &local)).collect::<Result<Vec<f64>>>()?;
        grid::integrate(&path.grid, &dens)
    };
    let value = eval(path, values)?;
    let discretization_estimate = if path.len() >= 9 {
        let coarse = PathSample {
            kind: path.kind,
            grid: grid::coarsen(&path.grid),
            points: grid::coarsen(&path.points),
            tangents: grid::coarsen(&path.tangents),
            energies: grid::coarsen(&path.energies),
            energy_drift: path.energy_drift,
        };
        (eval(&coarse, &grid::coarsen(values))? - value).abs()
    } else {
        f64::INFINITY
    };
    Ok(QuadraticFormReport { value, discretization_estimate })
}

/// δ²S along a Newton extremal.
pub fn second_variation_s(system: &NaturalSystem, path: &PathSample, v: &VariationField) -> Result<QuadraticFormReport> {
    second_variation_s_with(system, path, v, &VariationOptions::default())
}

pub fn second_variation_s_with(
    system: &NaturalSystem,
    path: &PathSample,
    v: &VariationField,
    opts: &VariationOptions,
) -> Result<QuadraticFormReport> {
    check_kind(path, ParameterKind::Time)?;
    check_len(path, v)?;
    check_proper(v, opts)?;
    check_newton_extremal(system, path, opts)?;
    action_form(system, path, &v.values)
}

fn action_form(system: &NaturalSystem, path: &PathSample, values: &[DVector<f64>]) -> Result<QuadraticFormReport> {
    let g = system.metric();
    form(g, path, values, false, |i, l| {
        let p = &l.path.points[i];
        let (v, dv) = (&l.v[i], &l.dv[i]);
        let r = curvature_operator(g, p, &l.path.tangents[i], v)?;
        let hess = system.covariant_hessian(p)?;
        Ok(g.inner(p, dv, dv)? - g.inner(p, &r, v)? - (hess * v).dot(v))
    })
}

/// ∫⟨Δ̄V, V⟩ dt with Δ̄ = −D²/dt² − R(γ̇,·)γ̇ − ∇grad U, by second differences.
pub fn operator_form_s(system: &NaturalSystem, path: &PathSample, v: &VariationField) -> Result<f64> {
    check_kind(path, ParameterKind::Time)?;
    check_len(path, v)?;
    let g = system.metric();
    let dv = covariant_derivative_along(g, path, &v.values)?;
    let ddv = covariant_derivative_along(g, path, &dv)?;
    let mut dens = Vec::with_capacity(path.len());
    for i in 0..path.len() {
        let p = &path.points[i];
        let r = curvature_operator(g, p, &path.tangents[i], &v.values[i])?;
        let hess = system.covariant_hessian(p)?;
        let w = &v.values[i];
        dens.push(-g.inner(p, &ddv[i], w)? - g.inner(p, &r, w)? - (hess * w).dot(w));
    }
    grid::integrate(&path.grid, &dens)
}

/// δ²S₀ᴶ: free-action Hessian of the Jacobi metric along an arc-length geodesic.
pub fn second_variation_s0j(system: &NaturalSystem, path: &PathSample, v: &VariationField) -> Result<QuadraticFormReport> {
    second_variation_s0j_with(system, path, v, &VariationOptions::default())
}

pub fn second_variation_s0j_with(
    system: &NaturalSystem,
    path: &PathSample,
    v: &VariationField,
    opts: &VariationOptions,
) -> Result<QuadraticFormReport> {
    check_kind(path, ParameterKind::ArcLength)?;
    check_len(path, v)?;
    check_proper(v, opts)?;
    let h = system.jacobi_metric();
    check_geodesic(&h, path, opts)?;
    free_action_form(&h, path, &v.values)
}

fn free_action_form(h: &MetricField, path: &PathSample, values: &[DVector<f64>]) -> Result<QuadraticFormReport> {
    form(h, path, values, false, |i, l| {
        let p = &l.path.points[i];
        let (v, dv) = (&l.v[i], &l.dv[i]);
        let r = curvature_operator(h, p, &l.path.tangents[i], v)?;
        Ok(h.inner(p, dv, dv)? - h.inner(p, &r, v)?)
    })
}

/// δ²Lᴶ: Jacobi-length Hessian; only the h-orthogonal part of V contributes.
pub fn second_variation_lj(system: &NaturalSystem, path: &PathSample, v: &VariationField) -> Result<QuadraticFormReport> {
    second_variation_lj_with(system, path, v, &VariationOptions::default())
}

pub fn second_variation_lj_with(
    system: &NaturalSystem,
    path: &PathSample,
    v: &VariationField,
    opts: &VariationOptions,
) -> Result<QuadraticFormReport> {
    check_kind(path, ParameterKind::ArcLength)?;
    check_len(path, v)?;
    check_proper(v, opts)?;
    let h = system.jacobi_metric();
    check_geodesic(&h, path, opts)?;
    let perp = project_orthogonal(&h, path, v)?;
    length_form(&h, path, &perp.values)
}

fn length_form(h: &MetricField, path: &PathSample, values: &[DVector<f64>]) -> Result<QuadraticFormReport> {
    form(h, path, values, false, |i, l| {
        let p = &l.path.points[i];
        let t = &l.path.tangents[i];
        let (v, dv) = (&l.v[i], &l.dv[i]);
        let tt = h.inner(p, t, t)?;
        let dt = h.inner(p, dv, t)?;
        let normal = h.inner(p, dv, dv)? - dt * dt / tt;
        let r = curvature_operator(h, p, t, v)?;
        Ok((normal - h.inner(p, &r, v)?) / tt.sqrt())
    })
}

/// Action Hessian compared with the Jacobi free-action Hessian:
/// δ²S₀ᴶ = δ²S + ∫ 2⟨γ̇, DV/dt⟩⟨F, V⟩ dt with F = grad ln 2(i₁ − U).
pub fn free_action_identity_residual(system: &NaturalSystem, newton_path: &PathSample, v: &VariationField) -> Result<IdentityCheck> {
    let opts = VariationOptions::default();
    check_kind(newton_path, ParameterKind::Time)?;
    check_len(newton_path, v)?;
    check_proper(v, &opts)?;
    let arc = dynamics::time_to_arclength(system, newton_path)?;
    let s = second_variation_s_with(system, newton_path, v, &opts)?;
    let s0j = second_variation_s0j_with(system, &arc, v, &opts)?;
    let g = system.metric();
    let correction = form(g, newton_path, &v.values, false, |i, l| {
        let p = &l.path.points[i];
        // ⟨F, V⟩ = d ln f (V)
        let f_dot_v = -2.0 * system.differential(p).dot(&l.v[i]) / system.jacobi_factor(p);
        Ok(2.0 * g.inner(p, &l.path.tangents[i], &l.dv[i])? * f_dot_v)
    })?;
    Ok(IdentityCheck::new(s0j, s, correction))
}

/// Action Hessian compared with the Jacobi length Hessian:
/// δ²Lᴶ = δ²S − ∫ [⟨∇γ̇ γ̇, V⟩ − ⟨γ̇, ∇γ̇ V⟩]² / 2(i₁ − U) dt.
pub fn length_identity_residual(system: &NaturalSystem, newton_path: &PathSample, v: &VariationField) -> Result<IdentityCheck> {
    let opts = VariationOptions::default();
    check_kind(newton_path, ParameterKind::Time)?;
    check_len(newton_path, v)?;
    check_proper(v, &opts)?;
    let arc = dynamics::time_to_arclength(system, newton_path)?;
    let s = second_variation_s_with(system, newton_path, v, &opts)?;
    let lj = second_variation_lj_with(system, &arc, v, &opts)?;
    let g = system.metric();
    let defect = form(g, newton_path, &v.values, true, |i, l| {
        let p = &l.path.points[i];
        let bracket = g.inner(p, &l.acc[i], &l.v[i])? - g.inner(p, &l.path.tangents[i], &l.dv[i])?;
        Ok(bracket * bracket / system.jacobi_factor(p))
    })?;
    let correction = QuadraticFormReport { value: -defect.value, discretization_estimate: defect.discretization_estimate };
    Ok(IdentityCheck::new(lj, s, correction))
}

/// δ²S restricted to an orthogonal variation, compared with δ²Lᴶ plus
/// ∫ (⟨Fᴶ, V⊥⟩ₕ)² ds.
pub fn orthogonal_identity_residual(system: &NaturalSystem, geodesic: &PathSample, v_orth: &VariationField) -> Result<IdentityCheck> {
    orthogonal_identity_with_scale(system, geodesic, v_orth, JACOBI_FORCE_SCALE)
}

fn orthogonal_identity_with_scale(
    system: &NaturalSystem,
    geodesic: &PathSample,
    v_orth: &VariationField,
    c: f64,
) -> Result<IdentityCheck> {
    let opts = VariationOptions::default();
    check_kind(geodesic, ParameterKind::ArcLength)?;
    check_len(geodesic, v_orth)?;
    check_proper(v_orth, &opts)?;
    let h = system.jacobi_metric();
    check_orthogonal(&h, geodesic, v_orth)?;
    let newton = dynamics::arclength_to_time(system, geodesic)?;
    let s = second_variation_s_with(system, &newton, v_orth, &opts)?;
    let lj = second_variation_lj_with(system, geodesic, v_orth, &opts)?;
    let force = form(&h, geodesic, &v_orth.values, false, |i, l| {
        let p = &l.path.points[i];
        let proj = -2.0 * c * system.differential(p).dot(&l.v[i]) / system.jacobi_factor(p);
        Ok(proj * proj)
    })?;
    Ok(IdentityCheck::new(s, lj, force))
}

fn check_orthogonal(h: &MetricField, path: &PathSample, v: &VariationField) -> Result<()> {
    for (i, (p, (t, w))) in path.points.iter().zip(path.tangents.iter().zip(&v.values)).enumerate() {
        let tt = h.norm(p, t)?;
        let ip = h.inner(p, w, t)? / tt.max(f64::MIN_POSITIVE);
        if ip.abs() > 1e-10 * w.norm().max(1.0) {
            return Err(Error::InvalidInput(format!("variation is not orthogonal at sample {i} (⟨V,γ'⟩ = {ip:e})")));
        }
    }
    Ok(())
}

/// Outcome of fitting the Jacobi-force normalisation.
#[derive(Clone, Debug)]
pub struct ForceCalibration {
    /// Candidate scale and the worst relative residual it leaves.
    pub candidates: Vec<(f64, f64)>,
    pub best: f64,
}

/// Evaluate the orthogonal identity for c ∈ {½, 1} on a validation family
/// and report which normalisation closes it.
pub fn calibrate_jacobi_force_scale(
    system: &NaturalSystem,
    geodesic: &PathSample,
    fields: &[VariationField],
) -> Result<ForceCalibration> {
    let mut candidates = Vec::new();
    for c in [0.5, 1.0] {
        let mut worst: f64 = 0.0;
        for f in fields {
            worst = worst.max(orthogonal_identity_with_scale(system, geodesic, f, c)?.relative());
        }
        candidates.push((c, worst));
    }
    let best = candidates.iter().min_by(|a, b| a.1.total_cmp(&b.1)).map(|c| c.0).unwrap_or(JACOBI_FORCE_SCALE);
    Ok(ForceCalibration { candidates, best })
}

/// Pointwise Gram-Schmidt of V against the tangent in `metric`.
pub fn project_orthogonal(metric: &MetricField, path: &PathSample, v: &VariationField) -> Result<VariationField> {
    check_len(path, v)?;
    let scale = path.tangents.iter().fold(0.0f64, |m, t| m.max(t.norm()));
    let mut out = Vec::with_capacity(path.len());
    for (i, (p, (t, w))) in path.points.iter().zip(path.tangents.iter().zip(&v.values)).enumerate() {
        let tt = metric.inner(p, t, t)?;
        if !(tt.sqrt() > 1e-12 * scale) || tt == 0.0 {
            return Err(Error::ZeroTangent(i));
        }
        let c = metric.inner(p, w, t)? / tt;
        let mut perp = w - t * c;
        // one refinement pass removes the rounding left by the first
        let c2 = metric.inner(p, &perp, t)? / tt;
        perp -= t * c2;
        out.push(perp);
    }
    Ok(VariationField { values: out, kind: VariationKind::Orthogonal })
}

/// Seeded smooth proper variation: each component a sum of 3-7 sine modes
/// over the normalised parameter, with coefficients uniform in ±1/k.
pub fn random_bump(path: &PathSample, rng: &mut impl Rng) -> VariationField {
    let (a, b) = path.span();
    let dim = path.dim();
    let modes = rng.random_range(3..=7usize);
    let coeffs: Vec<Vec<f64>> = (0..dim)
        .map(|_| (1..=modes).map(|k| rng.random_range(-1.0..1.0) / k as f64).collect())
        .collect();
    let n = path.len();
    let values = path
        .grid
        .iter()
        .enumerate()
        .map(|(i, tau)| {
            if i == 0 || i + 1 == n {
                return DVector::zeros(dim);
            }
            let u = (tau - a) / (b - a);
            DVector::from_fn(dim, |c, _| {
                coeffs[c].iter().enumerate().map(|(k, ck)| ck * ((k + 1) as f64 * std::f64::consts::PI * u).sin()).sum()
            })
        })
        .collect();
    VariationField { values, kind: VariationKind::General }
}

/// `count` reproducible bumps from one 64-bit seed.
pub fn random_bumps(path: &PathSample, seed: u64, count: usize) -> Vec<VariationField> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..count).map(|_| random_bump(path, &mut rng)).collect()
}

/// sin² bump of the given half-width centred at `center`, along `direction`.
pub fn half_sine_bump(path: &PathSample, center: f64, half_width: f64, direction: &DVector<f64>) -> VariationField {
    let values = path
        .grid
        .iter()
        .map(|tau| {
            let x = (tau - center) / half_width;
            if x.abs() >= 1.0 {
                DVector::zeros(direction.len())
            } else {
                direction * (0.5 * std::f64::consts::PI * (x + 1.0)).sin()
            }
        })
        .collect();
    VariationField { values, kind: VariationKind::General }
}
