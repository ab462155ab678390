//! Scenario files: TOML schema, defaults and validation.

use std::path::Path;

use serde::Deserialize;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("cannot read {path}: {source}")]
    Io { path: String, source: std::io::Error },
    #[error("{0}")]
    Parse(#[from] toml::de::Error),
    #[error("invalid scenario: {0}")]
    Invalid(String),
}

fn invalid<T>(msg: impl Into<String>) -> Result<T, ConfigError> {
    Err(ConfigError::Invalid(msg.into()))
}

#[derive(Debug, Clone, Deserialize, PartialEq, Default)]
#[serde(deny_unknown_fields, default)]
pub struct ScenarioConfig {
    pub mesh: MeshConfig,
    pub material: MaterialConfig,
    pub time: TimeConfig,
    pub regularization: RegularizationConfig,
    pub initial: InitialConfig,
    pub objective: ObjectiveConfig,
    pub control: ControlConfig,
    pub optimizer: OptimizerSection,
    pub newton: NewtonSection,
    pub gradcheck: GradcheckConfig,
    pub output: OutputConfig,
}

#[derive(Debug, Clone, Deserialize, PartialEq)]
#[serde(deny_unknown_fields, default)]
pub struct MeshConfig {
    pub dim: usize,
    pub extents: Vec<f64>,
    pub resolution: Vec<usize>,
    pub dirichlet: Vec<String>,
    pub lumped_mass: bool,
}

impl Default for MeshConfig {
    fn default() -> Self {
        Self {
            dim: 2,
            extents: vec![1.0, 1.0],
            resolution: vec![4, 4],
            dirichlet: vec!["left".into()],
            lumped_mass: false,
        }
    }
}

#[derive(Debug, Clone, Copy, Deserialize, PartialEq, Eq)]
#[serde(rename_all = "snake_case")]
pub enum MaterialKind {
    Isotropic,
    Matrix,
}

/// Either an isotropic Lamé pair with scalar hardening, or full Mandel matrices.
#[derive(Debug, Clone, Deserialize, PartialEq)]
#[serde(deny_unknown_fields, default)]
pub struct MaterialConfig {
    pub kind: MaterialKind,
    pub lame: f64,
    pub shear: f64,
    pub hardening: f64,
    pub elasticity_matrix: Option<Vec<Vec<f64>>>,
    pub hardening_matrix: Option<Vec<Vec<f64>>>,
    pub density: f64,
    pub yield_stress: f64,
}

impl Default for MaterialConfig {
    fn default() -> Self {
        Self {
            kind: MaterialKind::Isotropic,
            lame: 1.0,
            shear: 1.0,
            hardening: 0.5,
            elasticity_matrix: None,
            hardening_matrix: None,
            density: 1.0,
            yield_stress: 0.05,
        }
    }
}

#[derive(Debug, Clone, Copy, Deserialize, PartialEq, Eq)]
#[serde(rename_all = "snake_case")]
pub enum SchemeName {
    ImplicitEuler,
    CrankNicolson,
}

#[derive(Debug, Clone, Deserialize, PartialEq)]
#[serde(deny_unknown_fields, default)]
pub struct TimeConfig {
    pub final_time: f64,
    pub steps: usize,
    pub scheme: SchemeName,
}

impl Default for TimeConfig {
    fn default() -> Self {
        Self { final_time: 1.0, steps: 16, scheme: SchemeName::ImplicitEuler }
    }
}

#[derive(Debug, Clone, Copy, Deserialize, PartialEq, Eq)]
#[serde(rename_all = "snake_case")]
pub enum RegularizationKind {
    Smooth,
    Yosida,
}

#[derive(Debug, Clone, Deserialize, PartialEq)]
#[serde(deny_unknown_fields, default)]
pub struct RegularizationConfig {
    pub kind: RegularizationKind,
    pub lambda: f64,
    pub smoothing: f64,
    /// Values of λ for `lambda_study`.
    pub study_lambdas: Vec<f64>,
    /// Continuation stages; smoothing defaults to `λ/2` per stage.
    pub schedule_lambdas: Vec<f64>,
    pub schedule_smoothing: Option<Vec<f64>>,
    pub warm_start: bool,
}

impl Default for RegularizationConfig {
    fn default() -> Self {
        Self {
            kind: RegularizationKind::Smooth,
            lambda: 0.1,
            smoothing: 0.05,
            study_lambdas: vec![0.2, 0.1, 0.05, 0.025],
            schedule_lambdas: vec![0.2, 0.1, 0.05],
            schedule_smoothing: None,
            warm_start: true,
        }
    }
}

#[derive(Debug, Clone, Copy, Deserialize, PartialEq, Eq)]
#[serde(rename_all = "snake_case")]
pub enum InitialPreset {
    Rest,
    Prestressed,
    PlasticSeed,
}

/// Initial data. Nodal arrays (free dofs) and a quadrature-point `z₀`
/// (Mandel coefficients) override the preset; `q₀` is always derived.
#[derive(Debug, Clone, Deserialize, PartialEq)]
#[serde(deny_unknown_fields, default)]
pub struct InitialConfig {
    pub preset: InitialPreset,
    pub body_force: Vec<f64>,
    pub seed_strain: Vec<f64>,
    pub u: Option<Vec<f64>>,
    pub v: Option<Vec<f64>>,
    pub z: Option<Vec<f64>>,
}

impl Default for InitialConfig {
    fn default() -> Self {
        Self { preset: InitialPreset::Rest, body_force: Vec::new(), seed_strain: Vec::new(), u: None, v: None, z: None }
    }
}

#[derive(Debug, Clone, Copy, Deserialize, PartialEq, Eq)]
#[serde(rename_all = "snake_case")]
pub enum TargetPreset {
    /// Bending shape `−a·x²`, ramped in over time.
    StaticShape,
    /// Zero displacement, velocity and plastic strain.
    Rest,
    /// The uncontrolled trajectory (`f = 0`).
    Uncontrolled,
}

#[derive(Debug, Clone, Deserialize, PartialEq)]
#[serde(deny_unknown_fields, default)]
pub struct ObjectiveConfig {
    pub target: TargetPreset,
    pub amplitude: f64,
    pub alpha: f64,
}

impl Default for ObjectiveConfig {
    fn default() -> Self {
        Self { target: TargetPreset::StaticShape, amplitude: 0.2, alpha: 1e-3 }
    }
}

#[derive(Debug, Clone, Copy, Deserialize, PartialEq, Eq)]
#[serde(rename_all = "snake_case")]
pub enum ControlSpaceName {
    ZeroEnds,
    H1L2,
}

#[derive(Debug, Clone, Copy, Deserialize, PartialEq, Eq)]
#[serde(rename_all = "snake_case")]
pub enum InitialGuess {
    Zero,
    SinePulse,
}

/// Control space and the initial load (also the load of `forward` and `lambda_study`).
#[derive(Debug, Clone, Deserialize, PartialEq)]
#[serde(deny_unknown_fields, default)]
pub struct ControlConfig {
    pub space: ControlSpaceName,
    pub initial: InitialGuess,
    pub amplitude: f64,
    pub direction: Vec<f64>,
}

impl Default for ControlConfig {
    fn default() -> Self {
        Self { space: ControlSpaceName::ZeroEnds, initial: InitialGuess::SinePulse, amplitude: 0.5, direction: vec![0.0, -1.0] }
    }
}

#[derive(Debug, Clone, Deserialize, PartialEq)]
#[serde(deny_unknown_fields, default)]
pub struct OptimizerSection {
    pub max_iter: usize,
    pub grad_tol: f64,
    pub armijo_c1: f64,
    pub backtrack_factor: f64,
    pub max_backtracks: usize,
    pub memory: usize,
}

impl Default for OptimizerSection {
    fn default() -> Self {
        let d = evi_plast::optimize::OptimizerConfig::<f64>::default();
        Self {
            max_iter: d.max_iter,
            grad_tol: d.grad_tol,
            armijo_c1: d.armijo_c1,
            backtrack_factor: d.backtrack_factor,
            max_backtracks: d.max_backtracks,
            memory: d.memory,
        }
    }
}

#[derive(Debug, Clone, Deserialize, PartialEq)]
#[serde(deny_unknown_fields, default)]
pub struct NewtonSection {
    pub abs_tol: f64,
    pub rel_tol: f64,
    pub max_iter: usize,
    pub max_backtracks: usize,
}

impl Default for NewtonSection {
    fn default() -> Self {
        let d = evi_plast::resolvent::NewtonSettings::<f64>::default();
        Self { abs_tol: d.abs_tol, rel_tol: d.rel_tol, max_iter: d.max_iter, max_backtracks: d.max_backtracks }
    }
}

#[derive(Debug, Clone, Deserialize, PartialEq)]
#[serde(deny_unknown_fields, default)]
pub struct GradcheckConfig {
    pub directions: usize,
    pub eps: f64,
    /// Entry amplitude of the random directions.
    pub amplitude: f64,
}

impl Default for GradcheckConfig {
    fn default() -> Self {
        Self { directions: 10, eps: 1e-5, amplitude: 1.0 }
    }
}

#[derive(Debug, Clone, Copy, Deserialize, PartialEq, Eq)]
#[serde(rename_all = "snake_case")]
pub enum OutputFormat {
    Csv,
    Vtk,
    Both,
}

impl OutputFormat {
    pub fn csv(self) -> bool {
        matches!(self, Self::Csv | Self::Both)
    }

    pub fn vtk(self) -> bool {
        matches!(self, Self::Vtk | Self::Both)
    }
}

#[derive(Debug, Clone, Deserialize, PartialEq)]
#[serde(deny_unknown_fields, default)]
pub struct OutputConfig {
    pub dir: String,
    pub format: OutputFormat,
    /// Time nodes written as VTK snapshots; empty means first and last.
    pub snapshots: Vec<usize>,
}

impl Default for OutputConfig {
    fn default() -> Self {
        Self { dir: "out".into(), format: OutputFormat::Csv, snapshots: Vec::new() }
    }
}

pub fn load_scenario(path: &Path) -> Result<ScenarioConfig, ConfigError> {
    let text = std::fs::read_to_string(path).map_err(|source| ConfigError::Io { path: path.display().to_string(), source })?;
    parse_scenario(&text)
}

pub fn parse_scenario(text: &str) -> Result<ScenarioConfig, ConfigError> {
    let cfg: ScenarioConfig = toml::from_str(text)?;
    cfg.validate()?;
    Ok(cfg)
}

fn positive(name: &str, x: f64) -> Result<(), ConfigError> {
    if x > 0.0 && x.is_finite() {
        Ok(())
    } else {
        invalid(format!("{name} must be positive and finite, got {x}"))
    }
}

fn in_unit_interval(name: &str, s: f64) -> Result<(), ConfigError> {
    if s > 0.0 && s < 1.0 {
        Ok(())
    } else {
        invalid(format!("{name} = {s} violates the smoothing requirement s in (0, 1)"))
    }
}

impl ScenarioConfig {
    /// Structural checks that need no assembly. Checks depending on the mesh
    /// (array lengths, admissibility of the initial stress) run when the
    /// scenario is built.
    pub fn validate(&self) -> Result<(), ConfigError> {
        let m = &self.mesh;
        if !(m.dim == 1 || m.dim == 2) {
            return invalid(format!("mesh.dim must be 1 or 2, got {}", m.dim));
        }
        if m.extents.len() != m.dim || m.resolution.len() != m.dim {
            return invalid(format!("mesh.extents and mesh.resolution need {} entries", m.dim));
        }
        for &e in &m.extents {
            positive("mesh extent", e)?;
        }
        if m.resolution.contains(&0) {
            return invalid("mesh.resolution entries must be at least 1");
        }
        if m.dirichlet.is_empty() {
            return invalid("mesh.dirichlet is empty: the Dirichlet boundary must have positive boundary measure");
        }
        for side in &m.dirichlet {
            if evi_plast::mesh::Side::parse(side).is_none() {
                return invalid(format!("unknown Dirichlet side '{side}' (expected left, right, bottom or top)"));
            }
        }

        let mat = &self.material;
        positive("material.density", mat.density)?;
        positive("material.yield_stress", mat.yield_stress)?;
        match mat.kind {
            MaterialKind::Isotropic => {
                positive("material.shear", mat.shear)?;
                positive("material.hardening", mat.hardening)?;
            }
            MaterialKind::Matrix => {
                if mat.elasticity_matrix.is_none() || mat.hardening_matrix.is_none() {
                    return invalid("material.kind = \"matrix\" needs elasticity_matrix and hardening_matrix");
                }
            }
        }

        positive("time.final_time", self.time.final_time)?;
        if self.time.steps == 0 {
            return invalid("time.steps must be at least 1");
        }

        let r = &self.regularization;
        positive("regularization.lambda", r.lambda)?;
        in_unit_interval("regularization.smoothing", r.smoothing)?;
        for &l in r.study_lambdas.iter().chain(&r.schedule_lambdas) {
            positive("regularization lambda list entry", l)?;
        }
        if let Some(s) = &r.schedule_smoothing {
            if s.len() != r.schedule_lambdas.len() {
                return invalid("regularization.schedule_smoothing must have one entry per schedule lambda");
            }
            for &x in s {
                in_unit_interval("regularization.schedule_smoothing entry", x)?;
            }
        }

        if self.initial.preset == InitialPreset::PlasticSeed && self.initial.seed_strain.is_empty() && self.initial.z.is_none() {
            return invalid("initial.preset = \"plastic_seed\" needs initial.seed_strain");
        }

        positive("objective.alpha (Tikhonov weight)", self.objective.alpha)?;
        if self.control.direction.len() != m.dim {
            return invalid(format!("control.direction needs {} entries", m.dim));
        }
        if self.control.space == ControlSpaceName::ZeroEnds && self.time.steps < 2 {
            return invalid("the zero-ends control space needs at least 2 time steps");
        }

        let o = &self.optimizer;
        if !(o.armijo_c1 > 0.0 && o.armijo_c1 < 0.5) {
            return invalid(format!("optimizer.armijo_c1 must lie in (0, 1/2), got {}", o.armijo_c1));
        }
        if !(o.backtrack_factor > 0.0 && o.backtrack_factor < 1.0) {
            return invalid(format!("optimizer.backtrack_factor must lie in (0, 1), got {}", o.backtrack_factor));
        }
        positive("optimizer.grad_tol", o.grad_tol)?;

        positive("newton.abs_tol", self.newton.abs_tol)?;
        if self.newton.rel_tol.is_nan() || self.newton.rel_tol < 0.0 {
            return invalid("newton.rel_tol must be nonnegative");
        }
        if self.newton.max_iter == 0 {
            return invalid("newton.max_iter must be at least 1");
        }

        positive("gradcheck.eps", self.gradcheck.eps)?;
        positive("gradcheck.amplitude", self.gradcheck.amplitude)?;
        if self.gradcheck.directions == 0 {
            return invalid("gradcheck.directions must be at least 1");
        }
        if let Some(&k) = self.output.snapshots.iter().find(|&&k| k > self.time.steps) {
            return invalid(format!("output snapshot node {k} exceeds time.steps = {}", self.time.steps));
        }
        Ok(())
    }
}
