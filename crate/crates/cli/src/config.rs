//! Experiment configuration files (TOML, one experiment per file).

use std::collections::BTreeMap;
use std::f64::consts::PI;
use std::path::PathBuf;

use anyhow::{bail, Context, Result};
use serde::{Deserialize, Serialize};
use smalltime_core::coefficients::build_set;
use smalltime_core::{CoefficientSet, H1Convention, PeriodicField, Scheme, SolverConfig, TorusGrid};

/// Environment variable naming the default output directory.
pub const OUTPUT_DIR_ENV: &str = "SMALLTIME_OUTPUT_DIR";
pub const DEFAULT_OUTPUT_DIR: &str = "smalltime-out";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Command {
    Validate,
    Simulate,
    Scan,
    Rate,
    Accept,
}

impl Command {
    pub fn name(self) -> &'static str {
        match self {
            Self::Validate => "validate",
            Self::Simulate => "simulate",
            Self::Scan => "scan",
            Self::Rate => "rate",
            Self::Accept => "accept",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub command: Option<Command>,
    /// Master seed; required so that every artifact names its randomness.
    pub seed: u64,
    /// Worker threads; 0 uses every available core.
    #[serde(default = "one")]
    pub workers: usize,
    pub output_dir: Option<PathBuf>,
    #[serde(default)]
    pub coefficients: CoefficientsSection,
    #[serde(default)]
    pub grid: GridSection,
    #[serde(default)]
    pub solver: SolverSection,
    #[serde(default)]
    pub initial: InitialSection,
    pub scan: Option<ScanSection>,
    pub simulate: Option<SimulateSection>,
    pub rate: Option<RateSection>,
    pub validate: Option<ValidateSection>,
    pub accept: Option<AcceptSection>,
}

fn one() -> usize {
    1
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CoefficientsSection {
    pub name: String,
    /// Preset overrides; numbers and strings are both accepted.
    #[serde(default)]
    pub params: BTreeMap<String, toml::Value>,
}

impl Default for CoefficientsSection {
    fn default() -> Self {
        Self {
            name: "linear-heat".into(),
            params: BTreeMap::new(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridSection {
    pub dim: Option<usize>,
    #[serde(default = "default_n")]
    pub n: usize,
}

fn default_n() -> usize {
    16
}

impl Default for GridSection {
    fn default() -> Self {
        Self { dim: None, n: default_n() }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SchemeName {
    Imex,
    Explicit,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SolverSection {
    #[serde(default = "default_steps")]
    pub n_steps: usize,
    #[serde(default = "default_scheme")]
    pub scheme: SchemeName,
    #[serde(default = "yes")]
    pub dealias: bool,
    pub record_every: Option<usize>,
}

fn default_steps() -> usize {
    1000
}

fn default_scheme() -> SchemeName {
    SchemeName::Imex
}

fn yes() -> bool {
    true
}

impl Default for SolverSection {
    fn default() -> Self {
        Self {
            n_steps: default_steps(),
            scheme: default_scheme(),
            dealias: true,
            record_every: None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum InitialKind {
    Zero,
    Constant,
    Sine,
    Cosine,
}

/// `f(x) = offset + amplitude · trig(2π wave · x₀)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct InitialSection {
    #[serde(default = "default_initial")]
    pub kind: InitialKind,
    #[serde(default = "unit")]
    pub amplitude: f64,
    #[serde(default = "unit_wave")]
    pub wave: u32,
    #[serde(default)]
    pub offset: f64,
}

fn default_initial() -> InitialKind {
    InitialKind::Sine
}

fn unit() -> f64 {
    1.0
}

fn unit_wave() -> u32 {
    1
}

impl Default for InitialSection {
    fn default() -> Self {
        Self {
            kind: default_initial(),
            amplitude: 1.0,
            wave: 1,
            offset: 0.0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ScanKindName {
    Equivalence,
    EnergyBall,
    Smoothing,
    InitialData,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum H1Name {
    Bessel,
    Seminorm,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScanSection {
    pub kind: ScanKindName,
    /// Decreasing `ε` list; smoothing and initial-data scans use the first entry.
    pub eps: Vec<f64>,
    /// Fixed `δ` (or `M`); calibrated when absent.
    pub threshold: Option<f64>,
    /// Nested thresholds at a single `ε`.
    pub thresholds: Option<Vec<f64>>,
    /// Nested thresholds as multiples of the calibration scale.
    pub threshold_multiples: Option<Vec<f64>>,
    /// Mollification times for smoothing scans.
    #[serde(default)]
    pub r: Vec<f64>,
    /// Amplitudes `c` of the perturbations `f + c cos(2πx₀)` for initial-data scans.
    #[serde(default)]
    pub perturbations: Vec<f64>,
    #[serde(default = "default_paths")]
    pub n_paths: usize,
    #[serde(default = "default_calibration")]
    pub calibration_paths: usize,
    #[serde(default = "default_quantile")]
    pub quantile: f64,
    #[serde(default = "default_h1")]
    pub h1: H1Name,
}

fn default_paths() -> usize {
    1000
}

fn default_calibration() -> usize {
    200
}

fn default_quantile() -> f64 {
    0.9
}

fn default_h1() -> H1Name {
    H1Name::Bessel
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum EquationName {
    Scaled,
    Limit,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SimulateSection {
    #[serde(default = "unit")]
    pub eps: f64,
    #[serde(default)]
    pub r: f64,
    #[serde(default = "default_equation")]
    pub equation: EquationName,
    /// Index of the driving noise path.
    #[serde(default)]
    pub path_index: u64,
}

fn default_equation() -> EquationName {
    EquationName::Scaled
}

impl Default for SimulateSection {
    fn default() -> Self {
        Self {
            eps: 1.0,
            r: 0.0,
            equation: default_equation(),
            path_index: 0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PathFamily {
    /// `g ≡ f`.
    Constant,
    /// `g(t) = f + speed · t` (a constant-field ramp).
    Ramp,
    /// `g(t) = f + speed · t · sin(2πx₀)`.
    SineRamp,
    /// Skeleton driven by the constant control `ḣ_k = speed`.
    Skeleton,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RateSection {
    pub family: PathFamily,
    #[serde(default = "default_ctrl")]
    pub n_ctrl: usize,
    #[serde(default = "unit")]
    pub speed: f64,
    #[serde(default = "default_tol")]
    pub tol: f64,
}

fn default_ctrl() -> usize {
    20
}

fn default_tol() -> f64 {
    smalltime_core::rate::DEFAULT_TOL
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ValidateSection {
    #[serde(default = "default_samples")]
    pub n_samples: usize,
    /// Regularity index for the H³ proxy check, if requested.
    pub h3_a: Option<f64>,
}

fn default_samples() -> usize {
    500
}

impl Default for ValidateSection {
    fn default() -> Self {
        Self {
            n_samples: default_samples(),
            h3_a: None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Suite {
    Fast,
    Full,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AcceptSection {
    pub suite: Suite,
}

fn value_to_string(v: &toml::Value) -> String {
    match v {
        toml::Value::String(s) => s.clone(),
        other => other.to_string(),
    }
}

impl ExperimentConfig {
    pub fn from_toml(text: &str) -> Result<Self> {
        let cfg: Self = toml::from_str(text).context("invalid experiment config")?;
        Ok(cfg)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("config serializes")
    }

    /// Minimal config for a subcommand with every section defaulted.
    pub fn for_command(command: Command) -> Self {
        Self {
            command: Some(command),
            seed: 0,
            workers: 1,
            output_dir: None,
            coefficients: CoefficientsSection::default(),
            grid: GridSection::default(),
            solver: SolverSection::default(),
            initial: InitialSection::default(),
            scan: None,
            simulate: None,
            rate: None,
            validate: None,
            accept: None,
        }
    }

    pub fn command(&self) -> Result<Command> {
        self.command.context("no command given in the config or on the command line")
    }

    /// Output directory: config value, then the environment, then the default.
    pub fn resolved_output_dir(&self) -> PathBuf {
        self.output_dir
            .clone()
            .or_else(|| std::env::var_os(OUTPUT_DIR_ENV).map(PathBuf::from))
            .unwrap_or_else(|| PathBuf::from(DEFAULT_OUTPUT_DIR))
    }

    pub fn coefficient_set(&self) -> Result<CoefficientSet> {
        let params: BTreeMap<String, String> = self
            .coefficients
            .params
            .iter()
            .map(|(k, v)| (k.clone(), value_to_string(v)))
            .collect();
        let mut params = params;
        if let Some(d) = self.grid.dim {
            let prev = params.insert("dim".into(), d.to_string());
            if prev.is_some_and(|p| p != d.to_string()) {
                bail!("grid.dim = {d} disagrees with coefficients.params.dim");
            }
        }
        Ok(build_set(&self.coefficients.name, &params)?)
    }

    pub fn torus_grid(&self, set: &CoefficientSet) -> Result<TorusGrid> {
        Ok(TorusGrid::new(set.dim, self.grid.n)?)
    }

    pub fn solver_config(&self, grid: TorusGrid) -> Result<SolverConfig> {
        let s = &self.solver;
        if s.n_steps == 0 {
            bail!("solver.n_steps must be positive");
        }
        let scheme = match s.scheme {
            SchemeName::Imex => Scheme::Imex,
            SchemeName::Explicit => Scheme::Explicit,
        };
        let mut cfg = SolverConfig::new(grid, s.n_steps).with_scheme(scheme);
        cfg.dealias = s.dealias;
        if let Some(e) = s.record_every {
            if e == 0 {
                bail!("solver.record_every must be positive");
            }
            cfg.record_every = e;
        }
        Ok(cfg)
    }

    pub fn initial_field(&self, grid: TorusGrid) -> Result<PeriodicField> {
        let i = &self.initial;
        if !i.amplitude.is_finite() || !i.offset.is_finite() {
            bail!("initial amplitude and offset must be finite");
        }
        let w = 2.0 * PI * i.wave as f64;
        let (a, c) = (i.amplitude, i.offset);
        Ok(match i.kind {
            InitialKind::Zero => grid.zeros(),
            InitialKind::Constant => grid.constant(c + a),
            InitialKind::Sine => grid.sample(|x| c + a * (w * x[0]).sin()),
            InitialKind::Cosine => grid.sample(|x| c + a * (w * x[0]).cos()),
        })
    }

    /// Range checks that need no simulation.
    pub fn validate_ranges(&self) -> Result<()> {
        let set = self.coefficient_set()?;
        let grid = self.torus_grid(&set)?;
        self.solver_config(grid)?;
        self.initial_field(grid)?;
        if let Some(scan) = &self.scan {
            if scan.eps.is_empty() {
                bail!("scan.eps must list at least one value");
            }
            if scan.eps.iter().any(|&e| !(e > 0.0 && e <= 1.0)) {
                bail!("scan.eps values must lie in (0, 1]");
            }
            if scan.n_paths < smalltime_core::ldp::MIN_PATHS {
                bail!("scan.n_paths must be at least {}", smalltime_core::ldp::MIN_PATHS);
            }
            if !(scan.quantile > 0.0 && scan.quantile < 1.0) {
                bail!("scan.quantile must lie in (0, 1)");
            }
            let modes = [scan.threshold.is_some(), scan.thresholds.is_some(), scan.threshold_multiples.is_some()];
            if modes.iter().filter(|&&m| m).count() > 1 {
                bail!("give at most one of scan.threshold, scan.thresholds, scan.threshold_multiples");
            }
            match scan.kind {
                ScanKindName::Smoothing if scan.r.is_empty() => bail!("smoothing scans need scan.r"),
                ScanKindName::InitialData if scan.perturbations.is_empty() => {
                    bail!("initial-data scans need scan.perturbations")
                }
                _ => {}
            }
        }
        if let Some(sim) = &self.simulate {
            if !(sim.eps > 0.0 && sim.eps <= 1.0) {
                bail!("simulate.eps must lie in (0, 1]");
            }
            if !(sim.r >= 0.0) {
                bail!("simulate.r must be nonnegative");
            }
        }
        if let Some(rate) = &self.rate {
            if rate.n_ctrl == 0 {
                bail!("rate.n_ctrl must be positive");
            }
        }
        Ok(())
    }

    pub fn h1(&self) -> H1Convention {
        match self.scan.as_ref().map(|s| s.h1) {
            Some(H1Name::Seminorm) => H1Convention::Seminorm,
            _ => H1Convention::Bessel,
        }
    }
}
