//! Closed-form separatrix relations on i₁ = i₂ = 0.
//!
//! With wᵢ = √(1 − μᵢ) and the branch signs εᵢ = (−1)^{αᵢ} = sign(πᵢ), the
//! relations are written in the signed roots uᵢ = εᵢwᵢ, where they are odd.

use nalgebra::DVector;

use super::GarnierModel;
use crate::error::{Error, Result};

const SINGULAR_FLOOR: f64 = 1e-14;

/// α₁, α₂ ∈ {0, 1}; αᵢ = 1 when πᵢ < 0.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct BranchSigns {
    pub alpha1: u8,
    pub alpha2: u8,
}

impl BranchSigns {
    pub fn new(alpha1: u8, alpha2: u8) -> Self {
        BranchSigns { alpha1: alpha1 & 1, alpha2: alpha2 & 1 }
    }

    /// From the signs of the momenta (zero counts as positive).
    pub fn from_momenta(pi: &DVector<f64>) -> Self {
        BranchSigns::new(u8::from(pi[0] < 0.0), u8::from(pi[1] < 0.0))
    }

    /// From signed roots u; zero counts as positive.
    pub fn from_roots(u: [f64; 2]) -> Self {
        BranchSigns::new(u8::from(u[0] < 0.0), u8::from(u[1] < 0.0))
    }

    pub fn eps1(&self) -> f64 {
        if self.alpha1 == 0 { 1.0 } else { -1.0 }
    }

    pub fn eps2(&self) -> f64 {
        if self.alpha2 == 0 { 1.0 } else { -1.0 }
    }
}

fn roots(mu: &DVector<f64>) -> (f64, f64) {
    ((1.0 - mu[0]).max(0.0).sqrt(), (1.0 - mu[1]).max(0.0).sqrt())
}

/// ln|(u−σ)/(u+σ)| + σ ln|(1+u)/(1−u)|.
pub fn ln_g(sigma: f64, u: f64) -> f64 {
    ln_t(sigma, u) + sigma * ((1.0 + u) / (1.0 - u)).abs().ln()
}

/// ln|(u−σ)/(u+σ)|.
pub fn ln_t(sigma: f64, u: f64) -> f64 {
    ((u - sigma) / (u + sigma)).abs().ln()
}

fn check_singular(sigma: f64, mu: &DVector<f64>) -> Result<(f64, f64)> {
    let (w1, w2) = roots(mu);
    for w in [w1, w2] {
        if (w - sigma).abs() < SINGULAR_FLOOR || (1.0 - w).abs() < SINGULAR_FLOOR {
            return Err(Error::SingularFactor(mu[0], mu[1]));
        }
    }
    Ok((w1, w2))
}

/// Log form of the orbit equation minus its right side 2σσ̄²a.
pub fn orbit_residual(model: &GarnierModel, mu: &DVector<f64>, a: f64, signs: BranchSigns) -> Result<f64> {
    let s = model.sigma();
    let (w1, w2) = check_singular(s, mu)?;
    let lhs = signs.eps1() * ln_g(s, w1) + signs.eps2() * ln_g(s, w2);
    Ok(lhs - 2.0 * s * model.sigma_bar_sq() * a)
}

/// Log form of the time equation minus 2σ(t + t₀).
pub fn time_residual(model: &GarnierModel, mu: &DVector<f64>, t: f64, t0: f64, signs: BranchSigns) -> Result<f64> {
    let s = model.sigma();
    let (w1, w2) = check_singular(s, mu)?;
    let lhs = signs.eps1() * ln_t(s, w1) + signs.eps2() * ln_t(s, w2);
    Ok(lhs - 2.0 * s * (t + t0))
}

/// s + s₀ as a function of the point and branch.
pub fn arclength_relation(_model: &GarnierModel, mu: &DVector<f64>, signs: BranchSigns) -> f64 {
    let (w1, w2) = roots(mu);
    -signs.eps1() * (mu[0] + 2.0) / 3.0 * w1 - signs.eps2() * (mu[1] + 2.0) / 3.0 * w2
}

/// ∂μ/∂a along the separatrix family, in the elliptic chart.
pub fn explicit_jacobi_field(model: &GarnierModel, mu: &DVector<f64>, signs: BranchSigns) -> Result<DVector<f64>> {
    let (m1, m2) = (mu[0], mu[1]);
    let b = model.sigma_bar_sq();
    let p = m1 * m1 + m2 * m2 + m1 * m2 - b * (m1 + m2);
    if (m1 - m2).abs() < SINGULAR_FLOOR || p.abs() < SINGULAR_FLOOR * SINGULAR_FLOOR {
        return Err(Error::DegenerateDiagonal);
    }
    let (w1, w2) = roots(mu);
    let j = 2.0 * m1 * m2 * (m1 - b) * (m2 - b) / ((m1 - m2) * p);
    Ok(DVector::from_vec(vec![-j * signs.eps1() * m2 * w1, j * signs.eps2() * m1 * w2]))
}

/// Residuals of the two linear equations a Jacobi field ∂μ/∂a must satisfy:
/// the a-derivative of the orbit relation (right side 2) and the
/// fixed-s derivative of the arc-length relation (right side 0).
pub fn jacobi_system_residual(
    model: &GarnierModel,
    mu: &DVector<f64>,
    signs: BranchSigns,
    dmu: &DVector<f64>,
) -> Result<(f64, f64)> {
    let s = model.sigma();
    let b = model.sigma_bar_sq();
    let (w1, w2) = check_singular(s, mu)?;
    let (m1, m2) = (mu[0], mu[1]);
    let (e1, e2) = (signs.eps1(), signs.eps2());
    let ra = -e1 / (m1 * w1 * (b - m1)) * dmu[0] - e2 / (m2 * w2 * (b - m2)) * dmu[1] - 2.0;
    let rb = e1 * m1 / w1 * dmu[0] + e2 * m2 / w2 * dmu[1];
    Ok((ra, rb))
}
