//! Acceptance suite A1–A12. Every criterion becomes a report row; errors
//! inside a criterion are reported as failed rows rather than propagated.

use std::collections::BTreeMap;
use std::f64::consts::PI;
use std::fs;
use std::io::Write;
use std::time::Instant;

use anyhow::{ensure, Context};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use smalltime_core::coefficients::build_set;
use smalltime_core::ensemble::{map_paths, path_noise};
use smalltime_core::estimates::{a_term, l1_contraction_test, simulate_moments, gronwall_energy_bound, MomentEstimates};
use smalltime_core::heat::{apply_heat, mollify_diffusion};
use smalltime_core::ldp::{calibrate, epsilon_scan, smoothing_scan, threshold_scan};
use smalltime_core::rate::{action_of_control, forward_skeleton, min_norm_control, PathCandidate, DEFAULT_TOL};
use smalltime_core::solver::solve_scaled;
use smalltime_core::stats::Estimate;
use smalltime_core::{
    CoefficientSet, DiffusionSpec, H1Convention, McOptions, MollifierParams, NoisePath, NoiseSpec, PeriodicField,
    ScalarMap, SolverConfig, SpatialBasis, StreamRole, TailKind, TorusGrid,
};

use crate::config::{Command, ExperimentConfig, ScanKindName, ScanSection, Suite};
use crate::run::{run, METADATA_FILE, RESULTS_FILE};

const SEED: u64 = 0x5eed_0001;

/// The heat operator under test in A1; swapped out by the mutation test.
pub type HeatOp = fn(&PeriodicField, f64) -> smalltime_core::Result<PeriodicField>;

#[derive(Debug, Clone, PartialEq)]
pub struct CriterionRow {
    pub id: &'static str,
    pub measured: f64,
    pub bound: f64,
    pub pass: bool,
    pub seconds: f64,
    pub budget_seconds: f64,
    pub detail: String,
}

impl CriterionRow {
    pub fn line(&self) -> String {
        format!(
            "{} {} measured={:.6e} bound={:.6e} time={:.2}s/{:.0}s {}",
            self.id,
            if self.pass { "PASS" } else { "FAIL" },
            self.measured,
            self.bound,
            self.seconds,
            self.budget_seconds,
            self.detail
        )
    }
}

pub fn write_report_csv<W: Write>(rows: &[CriterionRow], w: W) -> anyhow::Result<()> {
    let mut w = csv::Writer::from_writer(w);
    w.write_record(["id", "measured", "bound", "pass", "seconds", "budget_seconds", "detail"])?;
    for r in rows {
        w.write_record([
            r.id.to_string(),
            r.measured.to_string(),
            r.bound.to_string(),
            r.pass.to_string(),
            format!("{:.3}", r.seconds),
            r.budget_seconds.to_string(),
            r.detail.clone(),
        ])?;
    }
    w.flush()?;
    Ok(())
}

/// Outcome of one criterion before timing is attached.
#[derive(Debug, Clone, PartialEq)]
pub struct Check {
    pub measured: f64,
    pub bound: f64,
    pub pass: bool,
    pub detail: String,
}

/// Ensemble sizes per suite.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct SuiteSize {
    pub a4_paths: usize,
    pub a5_paths: usize,
    pub a6_paths: usize,
    pub a7_paths: usize,
    pub a8_paths: usize,
    pub a9_paths: usize,
    pub a12_paths: usize,
}

impl SuiteSize {
    pub fn of(suite: Suite) -> Self {
        match suite {
            Suite::Full => Self {
                a4_paths: 10_000,
                a5_paths: 1000,
                a6_paths: 1000,
                a7_paths: 10_000,
                a8_paths: 1000,
                a9_paths: 200,
                a12_paths: 200,
            },
            Suite::Fast => Self {
                a4_paths: 2000,
                a5_paths: 250,
                a6_paths: 200,
                a7_paths: 2000,
                a8_paths: 300,
                a9_paths: 100,
                a12_paths: 100,
            },
        }
    }
}

fn timed(id: &'static str, budget: f64, f: impl FnOnce() -> anyhow::Result<Check>) -> CriterionRow {
    let start = Instant::now();
    let out = f();
    let seconds = start.elapsed().as_secs_f64();
    let (measured, bound, pass, mut detail) = match out {
        Ok(c) => (c.measured, c.bound, c.pass, c.detail),
        Err(e) => (f64::NAN, f64::NAN, false, format!("error: {e:#}")),
    };
    let in_budget = seconds <= budget;
    if !in_budget {
        detail.push_str(&format!("; over the {budget} s budget"));
    }
    CriterionRow {
        id,
        measured,
        bound,
        pass: pass && in_budget,
        seconds,
        budget_seconds: budget,
        detail,
    }
}

pub fn accept(suite: Suite) -> Vec<CriterionRow> {
    accept_with(suite, apply_heat)
}

/// Run every criterion with `heat` standing in for the heat operator.
pub fn accept_with(suite: Suite, heat: HeatOp) -> Vec<CriterionRow> {
    run_criteria(suite, heat, |_| {})
}

/// As [`accept_with`], calling `each` on every row as soon as it is known.
pub fn run_criteria(suite: Suite, heat: HeatOp, mut each: impl FnMut(&CriterionRow)) -> Vec<CriterionRow> {
    let size = SuiteSize::of(suite);
    let mut rows = Vec::with_capacity(12);
    let mut push = |row: CriterionRow| {
        each(&row);
        rows.push(row);
    };
    push(timed("A1", 1.0, || a1_heat(heat)));
    push(timed("A2", 10.0, a2_order));
    push(timed("A3", 10.0, a3_ellipticity));
    push(timed("A4", 300.0, || a4_linear_variance(size.a4_paths)));
    push(timed("A5", 600.0, || a5_energy(size.a5_paths)));
    push(timed("A6", 900.0, || a6_contraction(size.a6_paths)));
    push(timed("A7", 1800.0, || a7_equivalence(size.a7_paths)));
    push(timed("A8", 900.0, || a8_energy_ball(size.a8_paths)));
    push(timed("A9", 900.0, || a9_smoothing(size.a9_paths)));
    push(timed("A10", 30.0, a10_rate));
    push(timed("A11", 5.0, a11_mollifier));
    push(timed("A12", 300.0, || a12_reproducibility(size.a12_paths)));
    rows
}

fn sine(grid: TorusGrid) -> PeriodicField {
    grid.sample(|x| (2.0 * PI * x[0]).sin())
}

fn rel_l2(a: &PeriodicField, b: &PeriodicField) -> anyhow::Result<f64> {
    Ok(a.sub(b)?.l2_norm() / b.l2_norm())
}

fn preset(name: &str, params: &[(&str, &str)]) -> anyhow::Result<CoefficientSet> {
    let p: BTreeMap<String, String> = params.iter().map(|(k, v)| (k.to_string(), v.to_string())).collect();
    Ok(build_set(name, &p)?)
}

/// Heat multiplier on mode 1 and the semigroup law on a rough field.
pub fn a1_heat(heat: HeatOp) -> anyhow::Result<Check> {
    let grid = TorusGrid::new(1, 32)?;
    let f = sine(grid);
    let r = 0.01;
    let exact = f.scale((-4.0 * PI * PI * r).exp());
    let mode_err = rel_l2(&heat(&f, r)?, &exact)?;

    let mut rng = ChaCha8Rng::seed_from_u64(SEED);
    let g = PeriodicField::new(grid, (0..grid.total_points()).map(|_| rng.random_range(-1.0..1.0)).collect())?;
    let (s, t) = (0.003, 0.007);
    let composed = heat(&heat(&g, s)?, t)?;
    let direct = heat(&g, s + t)?;
    let semigroup_err = rel_l2(&composed, &direct)?;

    let measured = mode_err.max(semigroup_err);
    Ok(Check {
        measured,
        bound: 1e-12,
        pass: measured <= 1e-12,
        detail: format!("mode-1 relative error {mode_err:.3e}, semigroup relative error {semigroup_err:.3e}"),
    })
}

/// Relative error in `L²(0,1; H)` of the noiseless heat flow from `sin 2πx`.
///
/// The space-time norm is used because at `t = 1` the exact solution is
/// `e^{−4π²} ≈ 7e-18`, the size of the roundoff left in the mean mode, so an
/// endpoint error would measure roundoff rather than the scheme.
pub fn a2_order() -> anyhow::Result<Check> {
    let set = CoefficientSet::linear_heat(1);
    let grid = TorusGrid::new(1, 16)?;
    let f = sine(grid);
    let mut errors = Vec::new();
    for n_steps in [4000, 8000, 16_000, 32_000] {
        let cfg = SolverConfig::new(grid, n_steps).with_record_every(1);
        let traj = solve_scaled(&f, 1.0, &set, &NoisePath::zeros(1, n_steps), &cfg, 0.0)?;
        let (mut num, mut den) = (0.0, 0.0);
        for (t, u) in traj.times.iter().zip(&traj.snapshots) {
            let decay = (-4.0 * PI * PI * t).exp();
            for (&a, &b) in u.values().iter().zip(f.values()) {
                num += (a - decay * b).powi(2);
                den += (decay * b).powi(2);
            }
        }
        errors.push((num / den).sqrt());
    }
    let ratios: Vec<f64> = errors.windows(2).map(|w| w[0] / w[1]).collect();
    let worst = ratios.iter().map(|r| (r - 2.0).abs()).fold(0.0, f64::max);
    Ok(Check {
        measured: worst,
        bound: 0.4,
        pass: worst <= 0.4,
        detail: format!(
            "errors {}; ratios {}",
            errors.iter().map(|e| format!("{e:.4e}")).collect::<Vec<_>>().join(" "),
            ratios.iter().map(|r| format!("{r:.4}")).collect::<Vec<_>>().join(" ")
        ),
    })
}

/// Random smooth 2D field with amplitude up to `amp`.
fn random_field(rng: &mut ChaCha8Rng, grid: TorusGrid, amp: f64) -> PeriodicField {
    let terms: Vec<(f64, i64, i64, f64)> = (0..4)
        .map(|_| {
            (
                rng.random_range(-amp..amp),
                rng.random_range(-3..=3),
                rng.random_range(-3..=3),
                rng.random_range(0.0..1.0),
            )
        })
        .collect();
    grid.sample(|x| {
        terms
            .iter()
            .map(|&(c, k0, k1, p)| c * (2.0 * PI * (k0 as f64 * x[0] + k1 as f64 * x[1] + p)).sin())
            .sum()
    })
}

/// Eigenvalue window of the mollified `(1 + ½ sin u)I` over random `(u, r)`.
pub fn a3_ellipticity() -> anyhow::Result<Check> {
    let diffusion = DiffusionSpec::sin_modulated(0.5)?;
    let grid = TorusGrid::new(2, 16)?;
    let mut rng = ChaCha8Rng::seed_from_u64(SEED ^ 3);
    let (mut lo, mut hi) = (f64::INFINITY, f64::NEG_INFINITY);
    for _ in 0..50 {
        let amp = rng.random_range(0.1..10.0);
        let u = random_field(&mut rng, grid, amp);
        let r = 10f64.powf(rng.random_range(-4.0..0.0));
        let m = mollify_diffusion(&diffusion, &u, r)?;
        let ((min, _), (max, _)) = m.symmetric_eigen_range();
        lo = lo.min(min);
        hi = hi.max(max);
    }
    let bound = 0.5 - 1e-10;
    Ok(Check {
        measured: lo,
        bound,
        pass: lo >= bound && hi <= 1.5 + 1e-10,
        detail: format!("eigenvalues within [{lo:.12}, {hi:.12}] over 50 pairs"),
    })
}

/// Per-mode variance at `t = 1` of the additive heat equation against the OU law.
pub fn a4_linear_variance(n_paths: usize) -> anyhow::Result<Check> {
    let set = preset("heat-additive", &[("modes", "8"), ("decay", "2")])?;
    let eps = 0.25;
    let grid = TorusGrid::new(1, 16)?;
    let n_steps = 20_000;
    let cfg = SolverConfig::new(grid, n_steps);
    let f = grid.zeros();
    let table = set.noise.basis_table(grid);
    let k_modes = set.noise.n_modes();
    let n = grid.total_points() as f64;
    let samples = map_paths(n_paths, |i| {
        let noise = path_noise(&set, SEED, i, StreamRole::Dynamics, n_steps)?;
        let traj = solve_scaled(&f, eps, &set, &noise, &cfg, 0.0)?;
        let u = traj.last().values();
        Ok((0..k_modes)
            .map(|k| {
                let x: f64 = u.iter().zip(&table.values[k]).map(|(a, b)| a * b).sum::<f64>() / n;
                x * x
            })
            .collect::<Vec<f64>>())
    })?;
    let mut worst: f64 = 0.0;
    let mut parts = Vec::new();
    for k in 0..k_modes {
        let col: Vec<f64> = samples.iter().map(|s| s[k]).collect();
        let est = Estimate::from_samples(&col);
        let kappa = table.waves[k];
        let lambda = 4.0 * PI * PI * (kappa[0] * kappa[0] + kappa[1] * kappa[1]) as f64;
        let q2 = set.noise.amplitudes[k].powi(2);
        let target = if lambda == 0.0 {
            q2 * eps
        } else {
            q2 * (1.0 - (-2.0 * lambda * eps).exp()) / (2.0 * lambda)
        };
        let z = (est.mean - target).abs() / est.se;
        worst = worst.max(z);
        parts.push(format!("{z:.2}"));
    }
    Ok(Check {
        measured: worst,
        bound: 3.0,
        pass: worst <= 3.0,
        detail: format!("|var - OU|/SE per mode: {}", parts.join(" ")),
    })
}

/// Energy moments of the multiplicative `2^{-k} sin y` set against the Gronwall bound.
pub fn a5_energy(n_paths: usize) -> anyhow::Result<Check> {
    let set = preset("heat-sin", &[("modes", "8"), ("decay", "2")])?;
    let grid = TorusGrid::new(1, 32)?;
    let cfg = SolverConfig::new(grid, 4000);
    let f = sine(grid);
    let rho = set.diffusion.rho;
    let c = set.noise.growth;
    let f_sq = f.sobolev_norm(0.0)?.powi(2);
    let conv = H1Convention::Bessel;

    let p1 = MomentEstimates::from_samples(&simulate_moments(&f, 1.0, &set, &cfg, 1, conv, n_paths, SEED)?);
    let g1 = gronwall_energy_bound(f_sq, c, rho, 1);
    let sup_ratio = p1.sup.mean / (10.0 * g1);
    let diss_ratio = p1.dissipation.mean / (10.0 * g1 / (2.0 * rho));
    let bounded = p1.sup.mean.is_finite() && p1.dissipation.mean.is_finite() && sup_ratio < 1.0 && diss_ratio < 1.0;

    let doubled = simulate_moments(&f, 1.0, &set, &cfg, 2, conv, 2 * n_paths, SEED)?;
    let half = MomentEstimates::from_samples(&doubled[..n_paths]);
    let full = MomentEstimates::from_samples(&doubled);
    let pairs = [
        (half.sup, full.sup),
        (half.dissipation, full.dissipation),
        (half.integral_power, full.integral_power),
    ];
    let drift = pairs
        .iter()
        .map(|(a, b)| (a.mean - b.mean).abs() / a.se)
        .fold(0.0, f64::max);
    let stable = drift <= 2.0;
    Ok(Check {
        measured: sup_ratio.max(diss_ratio),
        bound: 1.0,
        pass: bounded && stable,
        detail: format!(
            "E sup = {:.4e}, E int = {:.4e}, bound G = {g1:.4e}; p=2 doubling drift {drift:.2} SE (limit 2)",
            p1.sup.mean, p1.dissipation.mean
        ),
    })
}

/// Amplitude `c` with `‖c cos 2πx‖_{L¹} = target` on the grid.
fn cosine_with_l1(grid: TorusGrid, target: f64) -> anyhow::Result<PeriodicField> {
    let unit = grid.sample(|x| (2.0 * PI * x[0]).cos());
    let norm = unit.lp_norm(1.0)?;
    Ok(unit.scale(target / norm))
}

/// L¹ contraction in the initial datum for the quasilinear set, nine cells.
pub fn a6_contraction(n_paths: usize) -> anyhow::Result<Check> {
    let set = preset("quasilinear-sin", &[])?;
    let grid = TorusGrid::new(1, 32)?;
    let cfg = SolverConfig::new(grid, 1000);
    let f = sine(grid);
    let mut worst: f64 = 0.0;
    let mut all = true;
    let mut parts = Vec::new();
    for gap in [0.2, 0.1, 0.05] {
        let f_k = f.add(&cosine_with_l1(grid, gap)?)?;
        for eps in [1.0, 0.5, 0.1] {
            let rep = l1_contraction_test(&f, &f_k, eps, &set, &cfg, n_paths, SEED)?;
            all &= rep.pass;
            let ratio = (rep.lhs.mean - 3.0 * rep.lhs.se) / rep.rhs;
            worst = worst.max(ratio);
            parts.push(format!("{gap}/{eps}:{:.4}", rep.lhs.mean / rep.rhs));
        }
    }
    Ok(Check {
        measured: worst,
        bound: 1.05,
        pass: all,
        detail: format!("(E int L1)/|f_k-f| per gap/eps: {}", parts.join(" ")),
    })
}

/// Calibrated `δ` equivalence scan, additive and sin-multiplicative sets.
pub fn a7_equivalence(n_paths: usize) -> anyhow::Result<Check> {
    let grid = TorusGrid::new(1, 16)?;
    let cfg = SolverConfig::new(grid, 1000);
    let eps_list = [0.2, 0.1, 0.05, 0.025];
    let mut opts = McOptions::new(n_paths, SEED);
    opts.h1 = H1Convention::Bessel;
    // f = sin 2πx is avoided for the multiplicative set: its deterministic gap
    // (1 − e^{−4π²ε})²‖f‖² hardly moves over this ε range, so the scan would sit
    // outside the asymptotic regime. A constant datum leaves only the noise-driven gap.
    let cases = [
        ("heat-additive", preset("heat-additive", &[])?, grid.zeros()),
        ("heat-sin/fourier", preset("heat-sin", &[("basis", "fourier")])?, grid.constant(1.0)),
    ];
    let mut pass = true;
    let mut worst_slope = f64::NEG_INFINITY;
    let mut parts = Vec::new();
    for (name, set, f) in &cases {
        let res = epsilon_scan(&TailKind::Equivalence, None, &eps_list, set, f, &cfg, &opts)?;
        ensure!(!res.rows[0].censored, "{name}: calibrated row has no hits");
        pass &= res.trend.strictly_decreasing_within_ci;
        worst_slope = worst_slope.max(res.trend.slope);
        parts.push(format!(
            "{name}: eps ln p = [{}], decreasing fit {}",
            res.rows
                .iter()
                .map(|r| format!("{:.4}{}", r.eps_log_p, if r.censored { "*" } else { "" }))
                .collect::<Vec<_>>()
                .join(", "),
            res.trend.strictly_decreasing_within_ci
        ));
    }
    Ok(Check {
        measured: worst_slope,
        bound: 0.0,
        pass,
        detail: parts.join("; "),
    })
}

/// Energy-ball tail over multiples of the calibration scale.
pub fn a8_energy_ball(n_paths: usize) -> anyhow::Result<Check> {
    let set = preset("heat-additive", &[])?;
    let grid = TorusGrid::new(1, 16)?;
    let cfg = SolverConfig::new(grid, 1000);
    let f = grid.zeros();
    let eps = 0.1;
    let opts = McOptions::new(n_paths, SEED);
    let scale = calibrate(&TailKind::EnergyBall, eps, &set, &f, &cfg, &opts)?;
    let thresholds: Vec<f64> = [2.0, 4.0, 8.0].iter().map(|m| m * scale).collect();
    let res = threshold_scan(&TailKind::EnergyBall, &thresholds, eps, &set, &f, &cfg, &opts)?;
    let finite = res.rows.iter().all(|r| r.eps_log_p.is_finite());
    let worst_step = res
        .rows
        .windows(2)
        .map(|w| w[1].eps_log_p - w[0].eps_log_p)
        .fold(f64::NEG_INFINITY, f64::max);
    Ok(Check {
        measured: worst_step,
        bound: 0.0,
        pass: finite && res.trend.nonincreasing_within_ci,
        detail: format!(
            "scale {scale:.4e}; eps ln p = [{}] (* censored)",
            res.rows
                .iter()
                .map(|r| format!("{:.4}{}", r.eps_log_p, if r.censored { "*" } else { "" }))
                .collect::<Vec<_>>()
                .join(", ")
        ),
    })
}

/// Coupled mollified runs: medians shrink with `r`, and constant `A` gives zero.
pub fn a9_smoothing(n_paths: usize) -> anyhow::Result<Check> {
    let grid = TorusGrid::new(1, 16)?;
    let cfg = SolverConfig::new(grid, 1000);
    let f = sine(grid);
    let eps = 0.5;
    let r_list = [0.1, 0.05, 0.025];
    let opts = McOptions::new(n_paths, SEED);

    let set = preset("quasilinear-sin", &[])?;
    let res = smoothing_scan(&r_list, eps, Some(1e-6), &set, &f, &cfg, &opts)?;
    let medians: Vec<f64> = res.rows.iter().map(|r| r.median_statistic).collect();
    let decreasing = medians.windows(2).all(|w| w[1] < w[0]);

    let constant = preset("heat-sin", &[])?;
    let zero = smoothing_scan(&r_list, eps, Some(1e-24), &constant, &f, &cfg, &opts)?;
    let constant_ok = zero.rows.iter().all(|r| r.hit_count == 0);
    let worst_ratio = medians.windows(2).map(|w| w[1] / w[0]).fold(0.0, f64::max);
    Ok(Check {
        measured: worst_ratio,
        bound: 1.0,
        pass: decreasing && constant_ok,
        detail: format!(
            "medians of sup |u - u_r|^2 over r = 0.1, 0.05, 0.025: {}; constant A paths above 1e-24: {}",
            medians.iter().map(|m| format!("{m:.4e}")).collect::<Vec<_>>().join(" "),
            zero.rows.iter().map(|r| r.hit_count).max().unwrap_or(0)
        ),
    })
}

/// Constant-field example, skeleton round trips and an infeasible target.
pub fn a10_rate() -> anyhow::Result<Check> {
    let grid = TorusGrid::new(1, 16)?;
    let n_ctrl = 20;

    let flat = NoiseSpec::new(ScalarMap::Constant(1.0), vec![0.5; 4], SpatialBasis::Uniform)?;
    let f = grid.constant(0.3);
    let ramp = PathCandidate::from_fn(n_ctrl, |t| f.map(|y| y + t))?;
    let ramp_rate = min_norm_control(&ramp, &flat, DEFAULT_TOL)?.rate;
    let ramp_err = (ramp_rate - 0.5).abs();

    let spec = NoiseSpec::new(
        ScalarMap::Sine { offset: 0.0, amp: 1.0 },
        vec![1.0, 0.5, 0.25, 0.125],
        SpatialBasis::Fourier,
    )?;
    let f = grid.sample(|x| 0.5 + 0.3 * (2.0 * PI * x[0]).cos());
    let mut rng = ChaCha8Rng::seed_from_u64(SEED ^ 10);
    let mut excess = f64::NEG_INFINITY;
    for _ in 0..20 {
        let hdot: Vec<Vec<f64>> = (0..n_ctrl)
            .map(|_| (0..spec.n_modes()).map(|_| rng.random_range(-1.0..1.0)).collect())
            .collect();
        let action = action_of_control(&hdot, 1.0 / n_ctrl as f64)?;
        let g = forward_skeleton(&f, &hdot, &spec, n_ctrl)?;
        let eval = min_norm_control(&g, &spec, DEFAULT_TOL)?;
        excess = excess.max(eval.rate - action);
    }

    let target = PathCandidate::from_fn(n_ctrl, |t| grid.sample(|x| t * (2.0 * PI * x[0]).sin()))?;
    let infeasible = min_norm_control(&target, &flat, DEFAULT_TOL)?;
    let infeasible_ok = infeasible.rate == f64::INFINITY && infeasible.residual > 0.0;

    let pass = ramp_err <= 1e-6 && excess <= 1e-4 && infeasible_ok;
    Ok(Check {
        measured: ramp_err,
        bound: 1e-6,
        pass,
        detail: format!(
            "ramp I = {ramp_rate:.9}; max round-trip excess {excess:.3e} (limit 1e-4); infeasible I = {}, residual {:.3e}",
            infeasible.rate, infeasible.residual
        ),
    })
}

/// Mollifier identities and derivative bounds for `m ≤ 6`.
pub fn a11_mollifier() -> anyhow::Result<Check> {
    const POINTS: usize = 10_000;
    let half_width = 1.5;
    let tol = 1e-12;
    let mut log_err: f64 = 0.0;
    let mut violations = Vec::new();
    let mut worst_gap: f64 = 0.0;
    for m in 1..=6u32 {
        let (lo, hi) = (a_term(m), a_term(m - 1));
        log_err = log_err.max(((hi / lo).ln() - m as f64).abs());
        let p = MollifierParams::new(m)?;
        for i in 0..POINTS {
            let x = -half_width + (i as f64 + 0.5) * 2.0 * half_width / POINTS as f64;
            let d1 = p.phi_prime(x);
            let d2 = p.phi_second(x);
            let gap = (p.phi(x) - x.abs()).abs().min(1.0);
            worst_gap = worst_gap.max(gap / hi);
            if d1.abs() > 1.0 + tol {
                violations.push(format!("m={m} x={x}: |phi'|={}", d1.abs()));
            }
            if d2 < -tol || d2 > 2.0 / (m as f64 * x.abs()) * (1.0 + tol) {
                violations.push(format!("m={m} x={x}: phi''={d2}"));
            }
            if gap > hi + tol {
                violations.push(format!("m={m} x={x}: |phi-|x||={gap}"));
            }
        }
    }
    let pass = log_err <= tol && violations.is_empty();
    Ok(Check {
        measured: log_err,
        bound: tol,
        pass,
        detail: format!(
            "max gap/a_(m-1) = {worst_gap:.4}; {} pointwise violations{}",
            violations.len(),
            violations.first().map(|v| format!(", first: {v}")).unwrap_or_default()
        ),
    })
}

/// Byte comparison of a scan run with 1 and 8 workers.
pub fn a12_reproducibility(n_paths: usize) -> anyhow::Result<Check> {
    let base = std::env::temp_dir().join(format!("smalltime-a12-{}", std::process::id()));
    let mut cfg = ExperimentConfig::for_command(Command::Scan);
    cfg.seed = SEED;
    cfg.coefficients.name = "heat-sin".into();
    cfg.solver.n_steps = 200;
    cfg.scan = Some(ScanSection {
        kind: ScanKindName::Equivalence,
        eps: vec![0.2, 0.1],
        threshold: None,
        thresholds: None,
        threshold_multiples: None,
        r: Vec::new(),
        perturbations: Vec::new(),
        n_paths,
        calibration_paths: 100,
        quantile: 0.9,
        h1: crate::config::H1Name::Bessel,
    });
    let mut outputs = Vec::new();
    for workers in [1usize, 8] {
        let mut c = cfg.clone();
        c.workers = workers;
        c.output_dir = Some(base.join(format!("w{workers}")));
        let summary = run(&c).map_err(|f| anyhow::anyhow!("{f}"))?;
        let results = fs::read(&summary.results).context("reading results")?;
        let metadata = fs::read(summary.metadata).context("reading metadata")?;
        outputs.push((results, metadata));
    }
    let _ = fs::remove_dir_all(&base);
    let same = outputs[0] == outputs[1];
    let differing = outputs[0]
        .0
        .iter()
        .zip(&outputs[1].0)
        .filter(|(a, b)| a != b)
        .count();
    Ok(Check {
        measured: differing as f64,
        bound: 0.0,
        pass: same,
        detail: format!(
            "{RESULTS_FILE} ({} bytes) and {METADATA_FILE} identical across 1 and 8 workers: {same}",
            outputs[0].0.len()
        ),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn quick_criteria_pass() {
        for (id, check) in [
            ("A1", a1_heat(apply_heat)),
            ("A3", a3_ellipticity()),
            ("A10", a10_rate()),
            ("A11", a11_mollifier()),
        ] {
            let c = check.unwrap();
            assert!(c.pass, "{id}: {c:?}");
        }
    }

    fn flipped_heat(f: &PeriodicField, r: f64) -> smalltime_core::Result<PeriodicField> {
        let mut s = f.to_spectral();
        let table = f.grid().mode_table();
        for (c, &k2) in s.coeffs.iter_mut().zip(&table.k_sq) {
            *c *= (4.0 * PI * PI * k2 * r).exp();
        }
        Ok(s.to_field())
    }

    #[test]
    fn sign_mutation_fails_a1() {
        let c = a1_heat(flipped_heat).unwrap();
        assert!(!c.pass);
        assert!(c.measured > 0.5, "{c:?}");
    }

    #[test]
    fn errors_become_failed_rows() {
        let row = timed("X", 1.0, || anyhow::bail!("boom"));
        assert!(!row.pass && row.detail.contains("boom"));
        let row = timed("Y", 0.0, || {
            std::thread::sleep(std::time::Duration::from_millis(5));
            Ok(Check {
                measured: 0.0,
                bound: 1.0,
                pass: true,
                detail: String::new(),
            })
        });
        assert!(!row.pass && row.detail.contains("budget"));
    }
}
