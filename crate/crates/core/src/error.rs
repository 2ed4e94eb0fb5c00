use thiserror::Error;

use crate::path::PathSample;

/// Every failure the toolkit can report.
#[derive(Debug, Error)]
pub enum Error {
    #[error("metric is degenerate at {point:?} (det = {det:e})")]
    DegenerateMetric { point: Vec<f64>, det: f64 },

    #[error("point {0:?} is outside the chart domain")]
    OutOfDomain(Vec<f64>),

    #[error("conformal factor {value:e} is not positive at {point:?}")]
    NonPositiveFactor { point: Vec<f64>, value: f64 },

    #[error("grid mismatch: expected {expected} samples, found {found}")]
    GridMismatch { expected: usize, found: usize },

    /// The partial path (everything accepted before the exit) travels with the error.
    #[error("curve left the chart domain at parameter {exit}")]
    LeftDomain { exit: f64, partial: Box<PathSample> },

    #[error("adaptive step fell below {floor:e} at parameter {at}")]
    StepUnderflow { at: f64, floor: f64 },

    #[error("energy {found} departs from i1 = {expected} by more than {bound:e}")]
    EnergyMismatch { expected: f64, found: f64, bound: f64 },

    #[error("Jacobi factor {value:e} below floor {floor:e} at sample {index}")]
    DegenerateFactor { index: usize, value: f64, floor: f64 },

    #[error("path is not an extremal: residual {residual:e} exceeds {tolerance:e}")]
    NotAnExtremal { residual: f64, tolerance: f64 },

    #[error("variation does not vanish at the endpoints (norm {0:e})")]
    ImproperVariation(f64),

    #[error("tangent vanishes at sample {0}")]
    ZeroTangent(usize),

    #[error("family member a = {a} failed the extremal test (residual {residual:e})")]
    FamilyResidual { a: f64, residual: f64 },

    #[error("orthogonal amplitude below the noise floor on {fraction:.3} of the span")]
    NoisyAmplitude { fraction: f64 },

    #[error("series coefficient overflow at power {0}")]
    TruncationOverflow(usize),

    #[error("series truncations differ ({0} vs {1})")]
    TruncationMismatch(usize, usize),

    #[error("unsupported: {0}")]
    Unsupported(String),

    #[error("point {0:?} lies outside the elliptic chart")]
    OutsideChart(Vec<f64>),

    #[error("chart boundary reached at ({0}, {1})")]
    ChartBoundary(f64, f64),

    #[error("singular factor in a closed-form relation at ({0}, {1})")]
    SingularFactor(f64, f64),

    #[error("parameter {value} outside [{lo}, {hi}]")]
    OutOfRange { value: f64, lo: f64, hi: f64 },

    #[error("root solve did not converge at parameter {0}")]
    RootNotConverged(f64),

    #[error("branch signs ambiguous at parameter {0}")]
    BranchAmbiguity(f64),

    #[error("point lies on the degenerate diagonal mu1 = mu2")]
    DegenerateDiagonal,

    #[error("invalid input: {0}")]
    InvalidInput(String),
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    /// Coarse classification used by front-ends to pick exit codes.
    pub fn is_numerical(&self) -> bool {
        !matches!(self, Error::InvalidInput(_) | Error::Unsupported(_) | Error::OutOfRange { .. })
    }

    /// Stable machine-readable tag.
    pub fn kind(&self) -> &'static str {
        match self {
            Error::DegenerateMetric { .. } => "DegenerateMetric",
            Error::OutOfDomain(_) => "OutOfDomain",
            Error::NonPositiveFactor { .. } => "NonPositiveFactor",
            Error::GridMismatch { .. } => "GridMismatch",
            Error::LeftDomain { .. } => "LeftDomain",
            Error::StepUnderflow { .. } => "StepUnderflow",
            Error::EnergyMismatch { .. } => "EnergyMismatch",
            Error::DegenerateFactor { .. } => "DegenerateFactor",
            Error::NotAnExtremal { .. } => "NotAnExtremal",
            Error::ImproperVariation(_) => "ImproperVariation",
            Error::ZeroTangent(_) => "ZeroTangent",
            Error::FamilyResidual { .. } => "FamilyResidual",
            Error::NoisyAmplitude { .. } => "NoisyAmplitude",
            Error::TruncationOverflow(_) => "TruncationOverflow",
            Error::TruncationMismatch(..) => "TruncationMismatch",
            Error::Unsupported(_) => "Unsupported",
            Error::OutsideChart(_) => "OutsideChart",
            Error::ChartBoundary(..) => "ChartBoundary",
            Error::SingularFactor(..) => "SingularFactor",
            Error::OutOfRange { .. } => "OutOfRange",
            Error::RootNotConverged(_) => "RootNotConverged",
            Error::BranchAmbiguity(_) => "BranchAmbiguity",
            Error::DegenerateDiagonal => "DegenerateDiagonal",
            Error::InvalidInput(_) => "InvalidInput",
        }
    }
}
