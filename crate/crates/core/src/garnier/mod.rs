//! The Garnier N = 2 system on its separatrix level i₁ = i₂ = 0.
//!
//! Potential `U(q) = −[½(q·q − 1)² + ½σ²q₂²]`, so Newton's equations read
//! `q̈ = 2q(q·q − 1) + σ²q₂ e₂` and the Jacobi factor 2(0 − U) vanishes only at
//! the vacua (±1, 0). Jacobi elliptic coordinates `μ₁ ≤ σ̄² ≤ μ₂` with
//! `σ̄² = 1 − σ²` separate the Hamilton-Jacobi equation; the base point is
//! D = (1, 0) ↔ (μ₁, μ₂) = (0, σ̄²).

mod elliptic;
mod relations;
mod separatrix;
mod singular;

use nalgebra::{DMatrix, DVector};

pub use elliptic::{
    cartesian_to_elliptic, chart_jacobian, elliptic_christoffels, elliptic_jacobi_factor, elliptic_jacobi_metric_field,
    elliptic_metric, elliptic_metric_field, elliptic_state, elliptic_to_cartesian, jacobi_metric_elliptic,
    printed_jacobi_factor, stackel_hamiltonian, EllipticState,
};
pub use relations::{
    arclength_relation, explicit_jacobi_field, jacobi_system_residual, ln_g, ln_t, orbit_residual, time_residual,
    BranchSigns,
};
pub use separatrix::{
    focus_velocity, push_forward_elliptic_field, separatrix_family, solve_separatrix_geodesic,
    solve_separatrix_trajectory, Chart, Leg, SeparatrixPath,
};
pub use singular::{singular_geodesic_arclength, singular_geodesic_tangent, singular_solution_time, singular_velocity_time, SingularBranch};

use crate::dynamics::NaturalSystem;
use crate::error::{Error, Result};
use crate::riemann::MetricField;

/// Parameters of the model; 0 < σ < 1.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct GarnierModel {
    sigma: f64,
}

impl GarnierModel {
    pub fn new(sigma: f64) -> Result<Self> {
        if !(sigma > 0.0 && sigma < 1.0) {
            return Err(Error::InvalidInput(format!("sigma must lie in (0, 1), got {sigma}")));
        }
        Ok(GarnierModel { sigma })
    }

    pub fn sigma(&self) -> f64 {
        self.sigma
    }

    /// σ̄² = 1 − σ².
    pub fn sigma_bar_sq(&self) -> f64 {
        1.0 - self.sigma * self.sigma
    }

    pub fn potential(&self, q: &DVector<f64>) -> f64 {
        let r = q.norm_squared() - 1.0;
        -(0.5 * r * r + 0.5 * self.sigma * self.sigma * q[1] * q[1])
    }

    pub fn potential_differential(&self, q: &DVector<f64>) -> DVector<f64> {
        let r = q.norm_squared() - 1.0;
        let s2 = self.sigma * self.sigma;
        DVector::from_vec(vec![-2.0 * r * q[0], -(2.0 * r * q[1] + s2 * q[1])])
    }

    pub fn potential_hessian(&self, q: &DVector<f64>) -> DMatrix<f64> {
        let r = q.norm_squared() - 1.0;
        let s2 = self.sigma * self.sigma;
        let mut h = DMatrix::zeros(2, 2);
        h[(0, 0)] = -(2.0 * r + 4.0 * q[0] * q[0]);
        h[(1, 1)] = -(2.0 * r + 4.0 * q[1] * q[1] + s2);
        h[(0, 1)] = -4.0 * q[0] * q[1];
        h[(1, 0)] = h[(0, 1)];
        h
    }

    /// 2(0 − U) = (q·q − 1)² + σ²q₂².
    pub fn jacobi_factor(&self, q: &DVector<f64>) -> f64 {
        -2.0 * self.potential(q)
    }

    /// Newton system in Cartesian coordinates at the separatrix energy 0.
    pub fn system(&self) -> NaturalSystem {
        let (m1, m2, m3) = (*self, *self, *self);
        NaturalSystem::new(MetricField::euclidean(2), move |q| m1.potential(q), 0.0)
            .with_differential(move |q| m2.potential_differential(q))
            .with_hessian(move |q| m3.potential_hessian(q))
    }

    /// Base point of every separatrix loop.
    pub fn vacuum(&self) -> DVector<f64> {
        DVector::from_vec(vec![1.0, 0.0])
    }

    /// First-quadrant Cartesian lift (σ, 0) of the focus image (σ̄², σ̄²).
    pub fn focus(&self) -> DVector<f64> {
        DVector::from_vec(vec![self.sigma, 0.0])
    }

    /// The focus the loops based at D actually cross, (−σ, 0).
    pub fn crossed_focus(&self) -> DVector<f64> {
        DVector::from_vec(vec![-self.sigma, 0.0])
    }

    /// Jacobi length of the q₂ = 0 edge between the vacua, 4/3.
    pub fn edge_length(&self) -> f64 {
        4.0 / 3.0
    }

    /// Jacobi length of the half ellipse between the vacua, 2σ(1 − σ²/3).
    pub fn ellipse_length(&self) -> f64 {
        2.0 * self.sigma * (1.0 - self.sigma * self.sigma / 3.0)
    }

    /// Jacobi length of one separatrix loop from D back to D.
    pub fn loop_length(&self) -> f64 {
        self.edge_length() + self.ellipse_length()
    }
}

/// L = ½|q̇|² + ½(q·q − 1)² + ½σ²q₂².
pub fn garnier_action_lagrangian(model: &GarnierModel, q: &DVector<f64>, qdot: &DVector<f64>) -> f64 {
    0.5 * qdot.norm_squared() - model.potential(q)
}
