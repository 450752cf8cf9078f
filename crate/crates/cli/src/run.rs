//! Experiment orchestration: one config in, a results CSV plus metadata out.

use std::fmt;
use std::fs;
use std::path::{Path, PathBuf};

use anyhow::{anyhow, Context};
use smalltime_core::coefficients::{h3_proxy_check, validate_h1, validate_h2, ValidationFailure, ValidationReport};
use smalltime_core::estimates::energy_functional;
use smalltime_core::ldp::{self, McOptions, SCAN_SCHEMA_VERSION};
use smalltime_core::rate::{forward_skeleton, min_norm_control, PathCandidate};
use smalltime_core::solver::{solve_limit, solve_scaled};
use smalltime_core::{ensemble::path_noise, StreamRole, TailKind};

use crate::accept;
use crate::config::{Command, EquationName, ExperimentConfig, PathFamily, ScanKindName, ValidateSection};

pub const VERSION: &str = env!("CARGO_PKG_VERSION");
pub const RESULTS_FILE: &str = "results.csv";
pub const METADATA_FILE: &str = "metadata.toml";
pub const ERROR_FILE: &str = "error.toml";

/// Machine-readable failure category, also the error record's `kind`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FailureKind {
    Config,
    Validation,
    BlowUp,
    Runtime,
}

impl FailureKind {
    pub fn label(self) -> &'static str {
        match self {
            Self::Config => "config",
            Self::Validation => "validation",
            Self::BlowUp => "blowup",
            Self::Runtime => "runtime",
        }
    }

    pub fn exit_code(self) -> i32 {
        match self {
            Self::Config => 2,
            _ => 1,
        }
    }
}

#[derive(Debug)]
pub struct Failure {
    pub kind: FailureKind,
    pub error: anyhow::Error,
}

impl Failure {
    pub fn config(error: anyhow::Error) -> Self {
        Self { kind: FailureKind::Config, error }
    }

    fn classify(error: anyhow::Error) -> Self {
        let kind = if error.downcast_ref::<ValidationFailure>().is_some() {
            FailureKind::Validation
        } else {
            match error.downcast_ref::<smalltime_core::Error>() {
                Some(smalltime_core::Error::BlowUp { .. } | smalltime_core::Error::TooManyBlowUps { .. }) => {
                    FailureKind::BlowUp
                }
                Some(smalltime_core::Error::Config(_) | smalltime_core::Error::UnknownCoefficient(_)) => {
                    FailureKind::Config
                }
                _ => FailureKind::Runtime,
            }
        };
        Self { kind, error }
    }

    /// TOML error record: `kind`, `message`, `exit_code`.
    pub fn record(&self) -> String {
        let mut t = toml::Table::new();
        t.insert("kind".into(), self.kind.label().into());
        t.insert("message".into(), format!("{:#}", self.error).into());
        t.insert("exit_code".into(), i64::from(self.kind.exit_code()).into());
        toml::to_string(&t).expect("table serializes")
    }

    /// Best-effort write of the error record into `dir`.
    pub fn write_record(&self, dir: &Path) {
        if fs::create_dir_all(dir).is_ok() {
            let _ = fs::write(dir.join(ERROR_FILE), self.record());
        }
    }
}

impl fmt::Display for Failure {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{} error: {:#}", self.kind.label(), self.error)
    }
}

/// What a successful run wrote.
#[derive(Debug, Clone, PartialEq)]
pub struct RunSummary {
    pub command: Command,
    pub results: PathBuf,
    pub metadata: PathBuf,
    /// Human-readable summary for stdout.
    pub report: String,
    /// False when the run completed but its checks did not all pass.
    pub passed: bool,
}

/// Result payload of one command: CSV body (without provenance) and a report.
struct Output {
    csv: Vec<u8>,
    report: String,
    passed: bool,
}

/// Validate, run on a pool of `workers` threads, and write the artifacts.
pub fn run(cfg: &ExperimentConfig) -> Result<RunSummary, Failure> {
    let command = cfg.command().map_err(Failure::config)?;
    cfg.validate_ranges().map_err(Failure::config)?;
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(cfg.workers)
        .build()
        .map_err(|e| Failure::classify(anyhow!(e)))?;
    let out = pool.install(|| execute(command, cfg)).map_err(Failure::classify)?;

    let dir = cfg.resolved_output_dir();
    let write = || -> anyhow::Result<(PathBuf, PathBuf)> {
        fs::create_dir_all(&dir).with_context(|| format!("creating {}", dir.display()))?;
        let results = dir.join(RESULTS_FILE);
        let mut body = provenance_header(cfg, command).into_bytes();
        body.extend_from_slice(&out.csv);
        fs::write(&results, body).with_context(|| format!("writing {}", results.display()))?;
        let metadata = dir.join(METADATA_FILE);
        fs::write(&metadata, metadata_toml(cfg, command)?).with_context(|| format!("writing {}", metadata.display()))?;
        Ok((results, metadata))
    };
    let (results, metadata) = write().map_err(Failure::classify)?;
    Ok(RunSummary {
        command,
        results,
        metadata,
        report: out.report,
        passed: out.passed,
    })
}

/// The config as it affects results: pool size and output location are dropped.
fn result_relevant(cfg: &ExperimentConfig, command: Command) -> ExperimentConfig {
    let mut c = cfg.clone();
    c.command = Some(command);
    c.workers = 1;
    c.output_dir = None;
    c
}

/// Comment lines carrying the version, seed and full config echo.
fn provenance_header(cfg: &ExperimentConfig, command: Command) -> String {
    let mut s = format!("# smalltime {VERSION}; command={}; seed={}\n", command.name(), cfg.seed);
    for line in result_relevant(cfg, command).to_toml().lines() {
        s.push_str("# config: ");
        s.push_str(line);
        s.push('\n');
    }
    s
}

fn metadata_toml(cfg: &ExperimentConfig, command: Command) -> anyhow::Result<String> {
    let mut run = toml::Table::new();
    run.insert("version".into(), VERSION.into());
    run.insert("command".into(), command.name().into());
    run.insert("seed".into(), toml::Value::Integer(cfg.seed as i64));
    run.insert("coefficient_set".into(), cfg.coefficients.name.clone().into());
    run.insert("scan_schema".into(), i64::from(SCAN_SCHEMA_VERSION).into());
    run.insert("results".into(), RESULTS_FILE.into());
    let echo: toml::Table = toml::from_str(&result_relevant(cfg, command).to_toml())?;
    let mut root = toml::Table::new();
    root.insert("run".into(), run.into());
    root.insert("config".into(), echo.into());
    Ok(toml::to_string(&root)?)
}

fn execute(command: Command, cfg: &ExperimentConfig) -> anyhow::Result<Output> {
    match command {
        Command::Validate => run_validate(cfg),
        Command::Simulate => run_simulate(cfg),
        Command::Scan => run_scan(cfg),
        Command::Rate => run_rate(cfg),
        Command::Accept => run_accept(cfg),
    }
}

fn report_rows(w: &mut csv::Writer<Vec<u8>>, r: &ValidationReport) -> anyhow::Result<()> {
    for c in &r.clauses {
        w.write_record([
            r.subject.clone(),
            c.name.clone(),
            format!("{:?}", c.kind).to_lowercase(),
            c.observed.to_string(),
            c.declared.to_string(),
            c.margin.to_string(),
            c.passed.to_string(),
            c.witness.clone(),
        ])?;
    }
    Ok(())
}

fn run_validate(cfg: &ExperimentConfig) -> anyhow::Result<Output> {
    let set = cfg.coefficient_set()?;
    let opts = cfg.validate.clone().unwrap_or_default();
    let ValidateSection { n_samples, h3_a } = opts;
    let mut reports = vec![validate_h1(&set, n_samples, cfg.seed)?];
    if !set.noise.is_zero() {
        reports.push(validate_h2(&set.noise, n_samples, cfg.seed)?);
    }
    if let Some(a) = h3_a {
        if !(0.0..=1.0).contains(&a) {
            return Err(smalltime_core::Error::Config(format!("validate.h3_a must lie in [0, 1] (got {a})")).into());
        }
        let r = h3_proxy_check(&set.noise, a, n_samples, cfg.seed);
        if !r.passed() {
            return Err(anyhow!("{r}"));
        }
        reports.push(r);
    }
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(["subject", "clause", "kind", "observed", "declared", "margin", "passed", "witness"])?;
    let mut report = String::new();
    for r in &reports {
        report_rows(&mut w, r)?;
        report.push_str(&r.to_string());
    }
    report.push_str("validation passed\n");
    Ok(Output {
        csv: w.into_inner()?,
        report,
        passed: true,
    })
}

fn run_simulate(cfg: &ExperimentConfig) -> anyhow::Result<Output> {
    let set = cfg.coefficient_set()?;
    let grid = cfg.torus_grid(&set)?;
    let solver = cfg.solver_config(grid)?;
    let f = cfg.initial_field(grid)?;
    let sim = cfg.simulate.clone().unwrap_or_default();
    let noise = path_noise(&set, cfg.seed, sim.path_index as usize, StreamRole::Dynamics, solver.n_steps)?;
    let traj = match sim.equation {
        EquationName::Scaled => solve_scaled(&f, sim.eps, &set, &noise, &solver, sim.r)?,
        EquationName::Limit => solve_limit(&f, sim.eps, &set, &noise, &solver)?,
    };
    let mut csv = Vec::new();
    traj.write_diagnostics_csv(&mut csv)?;
    let e = energy_functional(&traj, sim.eps, set.diffusion.rho, cfg.h1());
    let report = format!(
        "simulated {} steps of the {:?} equation at eps={}; sup |u|^2 = {:.6e}, energy = {:.6e}\n",
        solver.n_steps, sim.equation, sim.eps, e.sup_h_norm_sq, e.total
    );
    Ok(Output {
        csv,
        report,
        passed: true,
    })
}

fn run_scan(cfg: &ExperimentConfig) -> anyhow::Result<Output> {
    let scan = cfg.scan.clone().context("scan command needs a [scan] section")?;
    let set = cfg.coefficient_set()?;
    let grid = cfg.torus_grid(&set)?;
    let solver = cfg.solver_config(grid)?;
    let f = cfg.initial_field(grid)?;
    let mut opts = McOptions::new(scan.n_paths, cfg.seed);
    opts.calibration_paths = scan.calibration_paths;
    opts.quantile = scan.quantile;
    opts.h1 = cfg.h1();
    let eps0 = scan.eps[0];

    let result = match scan.kind {
        ScanKindName::Equivalence | ScanKindName::EnergyBall => {
            let kind = if scan.kind == ScanKindName::Equivalence {
                TailKind::Equivalence
            } else {
                TailKind::EnergyBall
            };
            if let Some(ts) = &scan.thresholds {
                ldp::threshold_scan(&kind, ts, eps0, &set, &f, &solver, &opts)?
            } else if let Some(ms) = &scan.threshold_multiples {
                let scale = ldp::calibrate(&kind, eps0, &set, &f, &solver, &opts)?;
                let ts: Vec<f64> = ms.iter().map(|m| m * scale).collect();
                let mut r = ldp::threshold_scan(&kind, &ts, eps0, &set, &f, &solver, &opts)?;
                r.calibrated = true;
                r
            } else {
                ldp::epsilon_scan(&kind, scan.threshold, &scan.eps, &set, &f, &solver, &opts)?
            }
        }
        ScanKindName::Smoothing => ldp::smoothing_scan(&scan.r, eps0, scan.threshold, &set, &f, &solver, &opts)?,
        ScanKindName::InitialData => {
            let f_n: Vec<_> = scan
                .perturbations
                .iter()
                .map(|&c| f.add(&grid.sample(|x| c * (2.0 * std::f64::consts::PI * x[0]).cos())))
                .collect::<Result<_, _>>()?;
            ldp::initial_data_scan(&f, &f_n, eps0, scan.threshold, &set, &solver, &opts)?
        }
    };
    let mut csv = Vec::new();
    result.write_csv(&mut csv)?;
    let mut report = format!("{} scan, {} rows\n", result.kind, result.rows.len());
    for r in &result.rows {
        report.push_str(&format!(
            "  eps={:<8} threshold={:<12.6e} hits={:>6}/{:<6} eps*ln p = {:.5}{}\n",
            r.eps,
            r.threshold,
            r.hit_count,
            r.n_paths,
            r.eps_log_p,
            if r.censored { " (censored)" } else { "" }
        ));
    }
    report.push_str(&format!(
        "  slope {:.4}; nonincreasing within CI: {}\n",
        result.trend.slope, result.trend.nonincreasing_within_ci
    ));
    Ok(Output {
        csv,
        report,
        passed: true,
    })
}

/// Candidate path for a named family.
pub fn family_path(
    family: PathFamily,
    f: &smalltime_core::PeriodicField,
    n_ctrl: usize,
    speed: f64,
    noise: &smalltime_core::NoiseSpec,
) -> anyhow::Result<PathCandidate> {
    let grid = f.grid();
    let two_pi = 2.0 * std::f64::consts::PI;
    Ok(match family {
        PathFamily::Constant => PathCandidate::from_fn(n_ctrl, |_| f.clone())?,
        PathFamily::Ramp => PathCandidate::from_fn(n_ctrl, |t| f.map(|y| y + speed * t))?,
        PathFamily::SineRamp => PathCandidate::from_fn(n_ctrl, |t| {
            f.add(&grid.sample(|x| speed * t * (two_pi * x[0]).sin())).expect("same grid")
        })?,
        PathFamily::Skeleton => {
            let hdot = vec![vec![speed; noise.n_modes()]; n_ctrl];
            forward_skeleton(f, &hdot, noise, n_ctrl)?
        }
    })
}

fn run_rate(cfg: &ExperimentConfig) -> anyhow::Result<Output> {
    let rate = cfg.rate.clone().context("rate command needs a [rate] section")?;
    let set = cfg.coefficient_set()?;
    let grid = cfg.torus_grid(&set)?;
    let f = cfg.initial_field(grid)?;
    let g = family_path(rate.family, &f, rate.n_ctrl, rate.speed, &set.noise)?;
    let eval = min_norm_control(&g, &set.noise, rate.tol)?;
    let mut csv = Vec::new();
    eval.write_csv(&mut csv)?;
    let report = format!("I(g) = {}\nresidual = {:.3e}\n", eval.rate, eval.residual);
    Ok(Output {
        csv,
        report,
        passed: true,
    })
}

fn run_accept(cfg: &ExperimentConfig) -> anyhow::Result<Output> {
    let suite = cfg.accept.as_ref().map_or(crate::config::Suite::Fast, |a| a.suite);
    let rows = accept::accept(suite);
    let mut csv = Vec::new();
    accept::write_report_csv(&rows, &mut csv)?;
    let passed = rows.iter().all(|r| r.pass);
    let mut report = String::new();
    for r in &rows {
        report.push_str(&r.line());
        report.push('\n');
    }
    Ok(Output { csv, report, passed })
}
