//! Run configuration: one JSON document, validated before any computation.

use std::path::{Path, PathBuf};

use maupertuis::{GarnierModel, MetricField, NaturalSystem, SingularBranch};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::CliError;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RunConfig {
    pub model: ModelConfig,
    pub tolerances: Tolerances,
    pub grid: GridConfig,
    /// Initial data or preset; each command picks a default when absent.
    pub trajectory: Option<TrajectorySpec>,
    pub seed: u64,
    /// Random bumps per extremal in hessian-check.
    pub variations: usize,
    /// Orbit constants a of the separatrix loops.
    pub orbits: Vec<f64>,
    /// Loop iterates examined by conjugate-points.
    pub copies: usize,
    /// Iterate depth of the Morse bookkeeping.
    pub depth: usize,
    pub output: OutputConfig,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            model: ModelConfig::default(),
            tolerances: Tolerances::default(),
            grid: GridConfig::default(),
            trajectory: None,
            seed: 42,
            variations: 10,
            orbits: vec![-1.2, -0.4, 0.0, 0.5, 1.5],
            copies: 2,
            depth: 3,
            output: OutputConfig::default(),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, rename_all = "snake_case")]
pub enum ModelConfig {
    Garnier { sigma: f64 },
    Custom(CustomModel),
}

impl Default for ModelConfig {
    fn default() -> Self {
        ModelConfig::Garnier { sigma: 0.5 }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CustomModel {
    pub metric: MetricSpec,
    pub potential: PotentialSpec,
    /// The energy level i₁.
    pub energy: f64,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MetricSpec {
    /// δ_ij on the plane.
    Euclidean,
    /// Unit sphere in (polar angle, azimuth).
    Sphere,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, rename_all = "snake_case")]
pub enum PotentialSpec {
    Constant(f64),
    /// U = ½(k₁x² + k₂y²).
    Harmonic { k: [f64; 2] },
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct Tolerances {
    /// Local error tolerance of the ODE integrators.
    pub integrator: f64,
    /// Pass/fail bound on relative identity residuals.
    pub threshold: f64,
}

impl Default for Tolerances {
    fn default() -> Self {
        Tolerances { integrator: 1e-12, threshold: 1e-5 }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct GridConfig {
    /// Parameter span; each command has its own default.
    pub start: Option<f64>,
    pub end: Option<f64>,
    pub samples: usize,
    /// Half-width of the time window around the focus crossing (time picture).
    pub time_half_width: f64,
    pub time_samples: usize,
}

impl Default for GridConfig {
    fn default() -> Self {
        GridConfig { start: None, end: None, samples: 801, time_half_width: 20.0, time_samples: 4001 }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, rename_all = "snake_case")]
pub enum TrajectorySpec {
    /// One of the two singular separatrices, through its midpoint.
    Singular(BranchName),
    /// The separatrix loop of orbit constant a.
    Separatrix {
        a: f64,
        #[serde(default)]
        t0: f64,
    },
    /// Explicit initial point and direction; the speed is fixed by the energy.
    State {
        position: [f64; 2],
        direction: [f64; 2],
        #[serde(default)]
        t0: f64,
    },
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BranchName {
    EdgeQ2zero,
    EdgeEllipse,
}

impl BranchName {
    pub fn name(self) -> &'static str {
        match self {
            BranchName::EdgeQ2zero => "edge_q2zero",
            BranchName::EdgeEllipse => "edge_ellipse",
        }
    }

    pub fn branch(self) -> SingularBranch {
        match self {
            BranchName::EdgeQ2zero => SingularBranch::EdgeQ2Zero,
            BranchName::EdgeEllipse => SingularBranch::EdgeEllipse,
        }
    }
}

impl std::str::FromStr for BranchName {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, String> {
        match s {
            "edge_q2zero" => Ok(BranchName::EdgeQ2zero),
            "edge_ellipse" => Ok(BranchName::EdgeEllipse),
            other => Err(format!("unknown branch {other:?} (edge_q2zero | edge_ellipse)")),
        }
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "snake_case")]
pub enum Format {
    #[default]
    Csv,
    Json,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct OutputConfig {
    pub format: Format,
    /// Output file; standard output when absent.
    pub path: Option<PathBuf>,
}

impl RunConfig {
    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::Config(format!("cannot read config {}: {e}", path.display())))?;
        Self::parse(&text)
    }

    pub fn parse(text: &str) -> Result<Self, CliError> {
        serde_json::from_str(text).map_err(|e| CliError::Config(format!("invalid config: {e}")))
    }

    /// SHA-256 of the effective configuration, as hex. The output path is left
    /// out so that the same run written to two files hashes the same.
    pub fn hash(&self) -> String {
        let mut c = self.clone();
        c.output.path = None;
        let bytes = serde_json::to_vec(&c).expect("config serialises");
        Sha256::digest(&bytes).iter().map(|b| format!("{b:02x}")).collect()
    }

    pub fn validate(&self) -> Result<(), CliError> {
        let bad = |m: String| Err(CliError::Config(m));
        match &self.model {
            ModelConfig::Garnier { sigma } => {
                GarnierModel::new(*sigma).map_err(|_| {
                    CliError::Config(format!("sigma = {sigma} is outside the supported regime 0 < sigma < 1"))
                })?;
            }
            ModelConfig::Custom(c) => {
                if !c.energy.is_finite() {
                    return bad("custom model energy must be finite".into());
                }
                let finite = match &c.potential {
                    PotentialSpec::Constant(u) => u.is_finite(),
                    PotentialSpec::Harmonic { k } => k.iter().all(|x| x.is_finite()),
                };
                if !finite {
                    return bad("custom potential coefficients must be finite".into());
                }
            }
        }
        let t = &self.tolerances;
        if !(t.integrator > 0.0 && t.integrator.is_finite()) {
            return bad(format!("tolerances.integrator must be positive, got {}", t.integrator));
        }
        if !(t.threshold >= 0.0) {
            return bad(format!("tolerances.threshold must be non-negative, got {}", t.threshold));
        }
        let g = &self.grid;
        for (name, v) in [("grid.start", g.start), ("grid.end", g.end)] {
            if v.is_some_and(|x| !x.is_finite()) {
                return bad(format!("{name} must be finite"));
            }
        }
        if let (Some(a), Some(b)) = (g.start, g.end) {
            if b < a {
                return bad(format!("grid.end ({b}) is below grid.start ({a})"));
            }
        }
        if !(g.time_half_width > 0.0 && g.time_half_width.is_finite()) {
            return bad("grid.time_half_width must be positive".into());
        }
        if g.time_samples < 8 {
            return bad("grid.time_samples must be at least 8".into());
        }
        if self.orbits.is_empty() || self.orbits.iter().any(|a| !a.is_finite()) {
            return bad("orbits must be a non-empty list of finite values".into());
        }
        if self.copies == 0 {
            return bad("copies must be at least 1".into());
        }
        if self.depth > 30 {
            return bad(format!("depth {} is beyond the supported range 0..=30", self.depth));
        }
        if self.variations == 0 {
            return bad("variations must be at least 1".into());
        }
        match &self.trajectory {
            Some(TrajectorySpec::State { position, direction, t0 }) => {
                if position.iter().chain(direction).chain([t0]).any(|x| !x.is_finite()) {
                    return bad("trajectory.state entries must be finite".into());
                }
                if direction.iter().all(|x| *x == 0.0) {
                    return bad("trajectory.state.direction must be non-zero".into());
                }
            }
            Some(TrajectorySpec::Separatrix { a, t0 }) => {
                if !a.is_finite() || !t0.is_finite() {
                    return bad("trajectory.separatrix entries must be finite".into());
                }
                self.garnier()?;
            }
            Some(TrajectorySpec::Singular(_)) => {
                self.garnier()?;
            }
            None => {}
        }
        Ok(())
    }

    /// The Garnier model, or a config error for custom models.
    pub fn garnier(&self) -> Result<GarnierModel, CliError> {
        match &self.model {
            ModelConfig::Garnier { sigma } => GarnierModel::new(*sigma).map_err(|e| CliError::Config(e.to_string())),
            ModelConfig::Custom(_) => Err(CliError::Config("this run needs the garnier model".into())),
        }
    }

    pub fn system(&self) -> Result<NaturalSystem, CliError> {
        match &self.model {
            ModelConfig::Garnier { .. } => Ok(self.garnier()?.system()),
            ModelConfig::Custom(c) => Ok(custom_system(c)),
        }
    }
}

fn custom_system(c: &CustomModel) -> NaturalSystem {
    let metric = match c.metric {
        MetricSpec::Euclidean => MetricField::euclidean(2),
        MetricSpec::Sphere => MetricField::round_sphere(),
    };
    match c.potential.clone() {
        PotentialSpec::Constant(u) => NaturalSystem::new(metric, move |_| u, c.energy)
            .with_differential(|_| maupertuis::DVector::zeros(2)),
        PotentialSpec::Harmonic { k } => NaturalSystem::new(metric, move |q| 0.5 * (k[0] * q[0] * q[0] + k[1] * q[1] * q[1]), c.energy)
            .with_differential(move |q| maupertuis::DVector::from_vec(vec![k[0] * q[0], k[1] * q[1]])),
    }
}
