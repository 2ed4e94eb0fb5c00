//! Maupertuis-Jacobi correspondence between Newton trajectories and Jacobi
//! geodesics: second variations, conjugate points and Morse bookkeeping, with
//! the Garnier N = 2 separatrices as a fully worked model.
//!
//! The crate root re-exports the shared data types; algorithms live in the
//! modules.

pub mod dynamics;
pub mod error;
pub mod garnier;
pub mod grid;
pub mod morse;
pub mod ode;
pub mod path;
pub mod riemann;
pub mod series;
pub mod variation;

pub use dynamics::NaturalSystem;
pub use error::{Error, Result};
pub use garnier::{BranchSigns, Chart, GarnierModel, SeparatrixPath, SingularBranch};
pub use morse::{ConjugatePointRecord, SolutionFamily};
pub use path::{ParameterKind, PathSample};
pub use riemann::{ChartDomain, Christoffel, MetricField};
pub use series::FormalSeries;
pub use variation::{IdentityCheck, QuadraticFormReport, VariationField, VariationKind};

pub use nalgebra::{DMatrix, DVector};
