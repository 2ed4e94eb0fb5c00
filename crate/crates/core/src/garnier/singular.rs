//! The two singular separatrices joining the vacua (±1, 0).

use nalgebra::DVector;

use super::GarnierModel;
use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum SingularBranch {
    /// The segment q₂ = 0, −1 < q₁ < 1.
    EdgeQ2Zero,
    /// The upper half of the ellipse q₁² + q₂²/σ̄² = 1.
    EdgeEllipse,
}

impl std::str::FromStr for SingularBranch {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "edge_q2zero" => Ok(SingularBranch::EdgeQ2Zero),
            "edge_ellipse" => Ok(SingularBranch::EdgeEllipse),
            other => Err(Error::InvalidInput(format!("unknown branch {other:?} (edge_q2zero | edge_ellipse)"))),
        }
    }
}

fn xy(a: f64, b: f64) -> DVector<f64> {
    DVector::from_vec(vec![a, b])
}

/// Newton solution with q₁ increasing through 0 at t = t₀.
pub fn singular_solution_time(model: &GarnierModel, branch: SingularBranch, t: f64, t0: f64) -> DVector<f64> {
    let tau = t - t0;
    match branch {
        SingularBranch::EdgeQ2Zero => xy(tau.tanh(), 0.0),
        SingularBranch::EdgeEllipse => {
            let x = model.sigma() * tau;
            xy(x.tanh(), model.sigma_bar_sq().sqrt() / x.cosh())
        }
    }
}

pub fn singular_velocity_time(model: &GarnierModel, branch: SingularBranch, t: f64, t0: f64) -> DVector<f64> {
    let tau = t - t0;
    match branch {
        SingularBranch::EdgeQ2Zero => xy(1.0 / tau.cosh().powi(2), 0.0),
        SingularBranch::EdgeEllipse => {
            let s = model.sigma();
            let x = s * tau;
            let sech = 1.0 / x.cosh();
            xy(s * sech * sech, -s * model.sigma_bar_sq().sqrt() * sech * x.tanh())
        }
    }
}

/// Root in [−1, 1] of x − x³/3 = s for |s| ≤ 2/3, written trigonometrically.
fn cubic_root(s: f64) -> (f64, f64) {
    // θ ∈ [0, π]: the positive numerator picks the continuous odd branch
    let theta = (4.0 - 9.0 * s * s).max(0.0).sqrt().atan2(-3.0 * s);
    let third = theta / 3.0;
    (-third.cos() + 3f64.sqrt() * third.sin(), theta)
}

/// Jacobi-arc-length geodesics along the edges, q₁ increasing with s and s = 0 at q₁ = 0.
pub fn singular_geodesic_arclength(model: &GarnierModel, branch: SingularBranch, s: f64) -> Result<DVector<f64>> {
    let sigma = model.sigma();
    match branch {
        SingularBranch::EdgeQ2Zero => {
            let hi = 2.0 / 3.0;
            range_check(s, hi)?;
            Ok(xy(cubic_root(s.clamp(-hi, hi)).0, 0.0))
        }
        SingularBranch::EdgeEllipse => {
            let hi = sigma * (1.0 - sigma * sigma / 3.0);
            range_check(s, hi)?;
            // x = σq̄₁ turns σ(q̄₁ − σ²q̄₁³/3) = s into the same cubic
            let (x, theta) = cubic_root(s.clamp(-hi, hi));
            let q1 = x / sigma;
            let arg = -2.0 + sigma * sigma + (2.0 * theta / 3.0).cos() + 3f64.sqrt() * (2.0 * theta / 3.0).sin();
            let q2 = model.sigma_bar_sq().sqrt() / sigma * arg.max(0.0).sqrt();
            Ok(xy(q1, q2))
        }
    }
}

fn range_check(s: f64, hi: f64) -> Result<()> {
    if !(s.abs() <= hi * (1.0 + 1e-14)) {
        return Err(Error::OutOfRange { value: s, lo: -hi, hi });
    }
    Ok(())
}

/// d/ds of [`singular_geodesic_arclength`]; infinite at the vacua.
pub fn singular_geodesic_tangent(model: &GarnierModel, branch: SingularBranch, s: f64) -> Result<DVector<f64>> {
    let q = singular_geodesic_arclength(model, branch, s)?;
    let sigma = model.sigma();
    match branch {
        SingularBranch::EdgeQ2Zero => Ok(xy(1.0 / (1.0 - q[0] * q[0]), 0.0)),
        SingularBranch::EdgeEllipse => {
            let d1 = 1.0 / (sigma * (1.0 - sigma * sigma * q[0] * q[0]));
            let d2 = -model.sigma_bar_sq().sqrt() * q[0] * d1 / (1.0 - q[0] * q[0]).sqrt();
            Ok(xy(d1, d2))
        }
    }
}
