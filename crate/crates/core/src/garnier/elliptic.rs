//! Jacobi elliptic chart: q₁² = (1−μ₁)(1−μ₂)/σ², q₂² = (σ̄²−μ₁)(μ₂−σ̄²)/σ².

use nalgebra::{DMatrix, DVector};

use super::GarnierModel;
use crate::error::{Error, Result};
use crate::riemann::{conformal_transform_with_gradient, ChartDomain, Christoffel, MetricField};

const BOUNDARY_FLOOR: f64 = 1e-13;
const FACTOR_FLOOR: f64 = 1e-14;

fn pair(mu: &DVector<f64>) -> (f64, f64) {
    (mu[0], mu[1])
}

/// (μ₁, μ₂) with μ₁ ≤ σ̄² ≤ μ₂ ≤ 1; quadrant information is lost.
pub fn cartesian_to_elliptic(model: &GarnierModel, q: &DVector<f64>) -> Result<DVector<f64>> {
    let b = model.sigma_bar_sq();
    let (x2, y2) = (q[0] * q[0], q[1] * q[1]);
    let sum = 1.0 + b - x2 - y2;
    let prod = b - b * x2 - y2;
    // prod < 0 is the outside of the ellipse q₁² + q₂²/σ̄² = 1
    if prod < -1e-12 || !sum.is_finite() {
        return Err(Error::OutsideChart(q.iter().copied().collect()));
    }
    let disc = (sum * sum - 4.0 * prod).max(0.0);
    let mu2 = 0.5 * (sum + disc.sqrt());
    let mu1 = if mu2 > 0.0 { prod.max(0.0) / mu2 } else { 0.0 };
    Ok(DVector::from_vec(vec![mu1.min(b), mu2.clamp(b, 1.0)]))
}

/// Inverse chart; `quadrant` holds the signs of (q₁, q₂).
pub fn elliptic_to_cartesian(model: &GarnierModel, mu: &DVector<f64>, quadrant: [f64; 2]) -> DVector<f64> {
    let (m1, m2) = pair(mu);
    let (s, b) = (model.sigma(), model.sigma_bar_sq());
    let q1 = ((1.0 - m1) * (1.0 - m2)).max(0.0).sqrt() / s;
    let q2 = ((b - m1) * (m2 - b)).max(0.0).sqrt() / s;
    DVector::from_vec(vec![quadrant[0].signum() * q1, quadrant[1].signum() * q2])
}

/// ∂q/∂μ of the inverse chart in the given quadrant.
pub fn chart_jacobian(model: &GarnierModel, mu: &DVector<f64>, quadrant: [f64; 2]) -> Result<DMatrix<f64>> {
    let (m1, m2) = pair(mu);
    check_boundary(model, m1, m2)?;
    let (s, b) = (model.sigma(), model.sigma_bar_sq());
    let (e1, e2) = (quadrant[0].signum(), quadrant[1].signum());
    let c = 1.0 / (2.0 * s);
    Ok(DMatrix::from_row_slice(
        2,
        2,
        &[
            -e1 * c * ((1.0 - m2) / (1.0 - m1)).sqrt(),
            -e1 * c * ((1.0 - m1) / (1.0 - m2)).sqrt(),
            -e2 * c * ((m2 - b) / (b - m1)).sqrt(),
            e2 * c * ((b - m1) / (m2 - b)).sqrt(),
        ],
    ))
}

fn check_boundary(model: &GarnierModel, m1: f64, m2: f64) -> Result<()> {
    let b = model.sigma_bar_sq();
    let factors = [1.0 - m1, b - m1, 1.0 - m2, m2 - b, m2 - m1];
    if factors.iter().any(|f| f.abs() < BOUNDARY_FLOOR) || !m1.is_finite() || !m2.is_finite() {
        return Err(Error::ChartBoundary(m1, m2));
    }
    Ok(())
}

/// Pullback of δ_ij: diagonal with g₁₁ = (μ₂−μ₁)/(4(1−μ₁)(σ̄²−μ₁)), g₂₂ = (μ₂−μ₁)/(4(1−μ₂)(μ₂−σ̄²)).
pub fn elliptic_metric(model: &GarnierModel, mu: &DVector<f64>) -> Result<DMatrix<f64>> {
    let (m1, m2) = pair(mu);
    check_boundary(model, m1, m2)?;
    let b = model.sigma_bar_sq();
    let g11 = -(m1 - m2) / (4.0 * (m1 - 1.0) * (m1 - b));
    let g22 = -(m2 - m1) / (4.0 * (m2 - 1.0) * (m2 - b));
    Ok(DMatrix::from_diagonal(&DVector::from_vec(vec![g11, g22])))
}

pub fn elliptic_christoffels(model: &GarnierModel, mu: &DVector<f64>) -> Result<Christoffel> {
    let (m1, m2) = pair(mu);
    check_boundary(model, m1, m2)?;
    let b = model.sigma_bar_sq();
    let p = |x: f64| (x - 1.0) * (x - b);
    let mut g = Christoffel::zeros(2);
    g.set(0, 0, 0, 1.0 / (2.0 * (m1 - m2)) - (2.0 * m1 - (1.0 + b)) / (2.0 * p(m1)));
    g.set(0, 0, 1, -1.0 / (2.0 * (m1 - m2)));
    g.set(0, 1, 1, p(m1) / (2.0 * p(m2) * (m1 - m2)));
    g.set(1, 1, 1, 1.0 / (2.0 * (m2 - m1)) - (2.0 * m2 - (1.0 + b)) / (2.0 * p(m2)));
    g.set(1, 0, 1, -1.0 / (2.0 * (m2 - m1)));
    g.set(1, 0, 0, p(m2) / (2.0 * p(m1) * (m2 - m1)));
    Ok(g)
}

/// Euclidean metric in the elliptic chart with closed-form Christoffels.
pub fn elliptic_metric_field(model: &GarnierModel) -> MetricField {
    let (m1, m2) = (*model, *model);
    let b = model.sigma_bar_sq();
    MetricField::fallible(2, move |mu| elliptic_metric(&m1, mu))
        .with_christoffels(move |mu| elliptic_christoffels(&m2, mu))
        .with_domain(ChartDomain::new(move |mu| (b - mu[0]).min(mu[1] - b).min(1.0 - mu[1]), 1e-12))
}

/// 2(0 − U) in elliptic form, μ₁² + μ₂² + μ₁μ₂ − σ̄²(μ₁ + μ₂).
pub fn elliptic_jacobi_factor(model: &GarnierModel, mu: &DVector<f64>) -> f64 {
    let (m1, m2) = pair(mu);
    let b = model.sigma_bar_sq();
    m1 * m1 + m2 * m2 + m1 * m2 - b * (m1 + m2)
}

/// The factor as a divided difference, [−(μ₁³−σ̄²μ₁²) + (μ₂³−σ̄²μ₂²)]/(μ₂−μ₁).
pub fn printed_jacobi_factor(model: &GarnierModel, mu: &DVector<f64>) -> Result<f64> {
    let (m1, m2) = pair(mu);
    if (m2 - m1).abs() < BOUNDARY_FLOOR {
        return Err(Error::DegenerateDiagonal);
    }
    let b = model.sigma_bar_sq();
    let c = |x: f64| x * x * x - b * x * x;
    Ok((c(m2) - c(m1)) / (m2 - m1))
}

fn factor_gradient(model: &GarnierModel, mu: &DVector<f64>) -> DVector<f64> {
    let (m1, m2) = pair(mu);
    let b = model.sigma_bar_sq();
    DVector::from_vec(vec![2.0 * m1 + m2 - b, 2.0 * m2 + m1 - b])
}

pub fn jacobi_metric_elliptic(model: &GarnierModel, mu: &DVector<f64>) -> Result<DMatrix<f64>> {
    let f = elliptic_jacobi_factor(model, mu);
    if !(f > FACTOR_FLOOR) {
        return Err(Error::DegenerateFactor { index: 0, value: f, floor: FACTOR_FLOOR });
    }
    Ok(elliptic_metric(model, mu)? * f)
}

/// Jacobi metric h in the elliptic chart, Christoffels from the conformal formula.
pub fn elliptic_jacobi_metric_field(model: &GarnierModel) -> MetricField {
    let base = elliptic_metric_field(model);
    let (m1, m2, m3) = (*model, *model, *model);
    let h = conformal_transform_with_gradient(
        &base,
        move |mu| elliptic_jacobi_factor(&m1, mu),
        move |mu| factor_gradient(&m2, mu),
    );
    let positive = ChartDomain::new(move |mu| elliptic_jacobi_factor(&m3, mu), 1e-12);
    h.with_domain(base.domain().intersect(&positive))
}

/// Separated Hamiltonian in (μ, π).
pub fn stackel_hamiltonian(model: &GarnierModel, mu: &DVector<f64>, pi: &DVector<f64>) -> Result<f64> {
    let (m1, m2) = pair(mu);
    check_boundary(model, m1, m2)?;
    let b = model.sigma_bar_sq();
    let num = -4.0 * (m1 - 1.0) * (m1 - b) * pi[0] * pi[0] - 4.0 * (1.0 - m2) * (m2 - b) * pi[1] * pi[1]
        - (m1 * m1 * m1 - b * m1 * m1)
        + (m2 * m2 * m2 - b * m2 * m2);
    Ok(num / (2.0 * (m1 - m2)))
}

/// A Cartesian state seen through the chart.
#[derive(Clone, Debug)]
pub struct EllipticState {
    pub mu: DVector<f64>,
    pub mu_dot: DVector<f64>,
    /// Conjugate momenta g μ̇.
    pub pi: DVector<f64>,
    /// Signs of (q₁, q₂), zero counted as positive.
    pub quadrant: [f64; 2],
}

pub fn elliptic_state(model: &GarnierModel, q: &DVector<f64>, qdot: &DVector<f64>) -> Result<EllipticState> {
    let mu = cartesian_to_elliptic(model, q)?;
    let quadrant = [if q[0] < 0.0 { -1.0 } else { 1.0 }, if q[1] < 0.0 { -1.0 } else { 1.0 }];
    let jac = chart_jacobian(model, &mu, quadrant)?;
    let mu_dot = jac.lu().solve(qdot).ok_or(Error::ChartBoundary(mu[0], mu[1]))?;
    let pi = elliptic_metric(model, &mu)? * &mu_dot;
    Ok(EllipticState { mu, mu_dot, pi, quadrant })
}
