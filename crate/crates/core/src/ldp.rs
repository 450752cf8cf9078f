//! Plain Monte Carlo tail estimates for coupled pairs of runs.
//!
//! Every path index owns one [`NoisePath`]; all solvers belonging to that
//! path consume it in lockstep, so pathwise distances are genuine couplings.
//! A path that blows up counts as a hit in every row.

use std::io::Write;

use crate::coefficients::CoefficientSet;
use crate::ensemble::{map_paths, path_noise};
use crate::error::{Error, Result};
use crate::estimates::H1Convention;
use crate::field::PeriodicField;
use crate::noise::{NoisePath, StreamRole};
use crate::solver::{sq_distance, Equation, SolverConfig, Stepper};
use crate::stats::{decreasing_fit_within, isotonic_decreasing, median, ols_slope, quantile, wilson_interval, Z95};

/// Frozen column order of scan CSVs.
pub const SCAN_COLUMNS: [&str; 8] = [
    "eps",
    "threshold",
    "n_paths",
    "hit_count",
    "p_hat",
    "wilson_ci_low",
    "wilson_ci_high",
    "eps_log_p",
];
pub const SCAN_SCHEMA_VERSION: u32 = 1;

/// Smallest ensemble a tail estimate accepts.
pub const MIN_PATHS: usize = 100;

/// Which pathwise event is counted.
#[derive(Debug, Clone, PartialEq)]
pub enum TailKind {
    /// `sup_t ‖u^ε − v^ε‖²_H > δ` against the limit equation.
    Equivalence,
    /// Energy functional `sup‖u^ε‖²_H + ερ∫‖u^ε‖²_{H¹} > M`.
    EnergyBall,
    /// `sup_t ‖u^ε − u^{r,ε}‖²_H > δ`.
    Smoothing { r: f64 },
    /// `sup_t ‖u^ε − u^ε_n‖²_H > δ` for perturbed initial data.
    InitialData { f_n: PeriodicField },
}

impl TailKind {
    pub fn label(&self) -> &'static str {
        match self {
            Self::Equivalence => "equivalence",
            Self::EnergyBall => "energy_ball",
            Self::Smoothing { .. } => "smoothing",
            Self::InitialData { .. } => "initial_data",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TailQuery {
    pub kind: TailKind,
    pub threshold: f64,
    pub eps: f64,
}

impl TailQuery {
    pub fn new(kind: TailKind, threshold: f64, eps: f64) -> Result<Self> {
        check_threshold(threshold)?;
        check_eps(eps)?;
        Ok(Self { kind, threshold, eps })
    }
}

fn check_threshold(t: f64) -> Result<()> {
    if !(t > 0.0) {
        return Err(Error::InvalidParameter {
            name: "threshold",
            reason: format!("must be positive (got {t})"),
        });
    }
    Ok(())
}

fn check_eps(eps: f64) -> Result<()> {
    if !(eps > 0.0 && eps <= 1.0) {
        return Err(Error::InvalidParameter {
            name: "eps",
            reason: format!("must lie in (0, 1] (got {eps})"),
        });
    }
    Ok(())
}

/// Ensemble settings shared by every scan.
#[derive(Debug, Clone, PartialEq)]
pub struct McOptions {
    pub n_paths: usize,
    pub seed: u64,
    /// Index of the first dynamics path; disjoint ranges give independent ensembles.
    pub first_path: usize,
    /// Paths in the calibration pre-pass.
    pub calibration_paths: usize,
    /// Calibration quantile of the pathwise statistic.
    pub quantile: f64,
    /// H¹ convention of the energy-ball functional.
    pub h1: H1Convention,
}

impl McOptions {
    pub fn new(n_paths: usize, seed: u64) -> Self {
        Self {
            n_paths,
            seed,
            first_path: 0,
            calibration_paths: 200,
            quantile: 0.9,
            h1: H1Convention::Bessel,
        }
    }

    fn check(&self) -> Result<()> {
        if self.n_paths < MIN_PATHS {
            return Err(Error::InvalidParameter {
                name: "n_paths",
                reason: format!("need at least {MIN_PATHS} paths (got {})", self.n_paths),
            });
        }
        if !(self.quantile > 0.0 && self.quantile < 1.0) {
            return Err(Error::InvalidParameter {
                name: "quantile",
                reason: format!("must lie in (0, 1) (got {})", self.quantile),
            });
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ScanRow {
    pub eps: f64,
    pub threshold: f64,
    pub n_paths: usize,
    pub hit_count: usize,
    pub p_hat: f64,
    pub wilson_ci_low: f64,
    pub wilson_ci_high: f64,
    /// `ε ln p̂`, or `ε ln(3/n)` when no path hit.
    pub eps_log_p: f64,
    pub censored: bool,
    pub blowups: usize,
    /// Median of the pathwise statistic (blow-ups count as `+∞`).
    pub median_statistic: f64,
}

impl ScanRow {
    fn from_stats(eps: f64, threshold: f64, stats: &[f64], blowups: usize) -> Self {
        let n = stats.len();
        let hits = stats.iter().filter(|&&s| s > threshold).count();
        let p_hat = hits as f64 / n as f64;
        let (lo, hi) = wilson_interval(hits, n, Z95);
        let censored = hits == 0;
        let eps_log_p = if censored {
            eps * (3.0 / n as f64).ln()
        } else {
            eps * p_hat.ln()
        };
        Self {
            eps,
            threshold,
            n_paths: n,
            hit_count: hits,
            p_hat,
            wilson_ci_low: lo,
            wilson_ci_high: hi,
            eps_log_p,
            censored,
            blowups,
            median_statistic: median(stats),
        }
    }

    /// Wilson interval mapped through `p ↦ ε ln p` (a zero lower end maps to `−∞`).
    pub fn eps_log_interval(&self) -> (f64, f64) {
        let f = |p: f64| if p > 0.0 { self.eps * p.ln() } else { f64::NEG_INFINITY };
        (f(self.wilson_ci_low), f(self.wilson_ci_high))
    }
}

/// Trend of `ε ln p̂` along the scan order.
#[derive(Debug, Clone, PartialEq)]
pub struct Trend {
    /// OLS slope of `ε ln p̂` (sentinels included) against the row index.
    pub slope: f64,
    /// Least-squares nonincreasing fit of the same values.
    pub isotonic: Vec<f64>,
    /// A strictly decreasing sequence fits inside every row's interval.
    pub strictly_decreasing_within_ci: bool,
    /// A nonincreasing sequence fits inside every row's interval.
    pub nonincreasing_within_ci: bool,
}

impl Trend {
    pub fn of(rows: &[ScanRow]) -> Self {
        let ys: Vec<f64> = rows.iter().map(|r| r.eps_log_p).collect();
        let xs: Vec<f64> = (0..rows.len()).map(|i| i as f64).collect();
        let ci: Vec<(f64, f64)> = rows.iter().map(ScanRow::eps_log_interval).collect();
        Self {
            slope: if rows.len() > 1 { ols_slope(&xs, &ys) } else { 0.0 },
            isotonic: isotonic_decreasing(&ys),
            strictly_decreasing_within_ci: decreasing_fit_within(&ci, true).is_some(),
            nonincreasing_within_ci: decreasing_fit_within(&ci, false).is_some(),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct LdpScanResult {
    pub kind: &'static str,
    pub rows: Vec<ScanRow>,
    /// Whether thresholds came from the calibration pre-pass.
    pub calibrated: bool,
    pub trend: Trend,
}

impl LdpScanResult {
    fn new(kind: &'static str, rows: Vec<ScanRow>, calibrated: bool) -> Self {
        let trend = Trend::of(&rows);
        Self {
            kind,
            rows,
            calibrated,
            trend,
        }
    }

    /// CSV with a schema comment line and the eight frozen columns.
    pub fn write_csv<W: Write>(&self, mut w: W) -> std::io::Result<()> {
        writeln!(w, "# schema: ldp-scan v{SCAN_SCHEMA_VERSION}; kind={}", self.kind)?;
        writeln!(w, "{}", SCAN_COLUMNS.join(","))?;
        for r in &self.rows {
            writeln!(
                w,
                "{},{},{},{},{},{},{},{}",
                r.eps, r.threshold, r.n_paths, r.hit_count, r.p_hat, r.wilson_ci_low, r.wilson_ci_high, r.eps_log_p
            )?;
        }
        Ok(())
    }
}

/// Pathwise statistics evaluated together on one path.
enum Columns<'a> {
    Equivalence,
    EnergyBall,
    Smoothing(&'a [f64]),
    InitialData(&'a [PeriodicField]),
}

impl Columns<'_> {
    fn len(&self) -> usize {
        match self {
            Self::Equivalence | Self::EnergyBall => 1,
            Self::Smoothing(rs) => rs.len(),
            Self::InitialData(fs) => fs.len(),
        }
    }
}

struct Run<'a> {
    set: &'a CoefficientSet,
    f: &'a PeriodicField,
    eps: f64,
    cfg: &'a SolverConfig,
    h1: H1Convention,
}

fn blown<T>(r: Result<T>) -> Result<Option<T>> {
    match r {
        Ok(v) => Ok(Some(v)),
        Err(Error::BlowUp { .. }) => Ok(None),
        Err(e) => Err(e),
    }
}

impl Run<'_> {
    /// One value per column, or `None` if any solver on the path blew up.
    fn path_values(&self, cols: &Columns<'_>, noise: &NoisePath) -> Result<Option<Vec<f64>>> {
        let n = self.cfg.n_steps;
        if let Columns::EnergyBall = cols {
            let mut st = Stepper::new(Equation::Scaled { r: 0.0 }, self.set, self.eps, self.cfg, self.f)?;
            let rho = self.set.diffusion.rho;
            let energy = |st: &mut Stepper<'_>| {
                let l2 = st.l2_sq();
                (l2, self.h1.h1_sq(l2, st.h1_semi_sq()))
            };
            let (l2, mut h_prev) = energy(&mut st);
            let (mut sup, mut integral) = (l2, 0.0);
            for step in 0..n {
                if blown(st.advance(step, noise.step(step)))?.is_none() {
                    return Ok(None);
                }
                let (l2, h) = energy(&mut st);
                sup = sup.max(l2);
                integral += 0.5 * st.dt() * (h_prev + h);
                h_prev = h;
            }
            return Ok(Some(vec![sup + self.eps * rho * integral]));
        }
        let scaled = Equation::Scaled { r: 0.0 };
        let mut base = Stepper::new(scaled, self.set, self.eps, self.cfg, self.f)?;
        let mut others = match cols {
            Columns::Equivalence => vec![Stepper::new(Equation::Limit, self.set, self.eps, self.cfg, self.f)?],
            Columns::Smoothing(rs) => rs
                .iter()
                .map(|&r| Stepper::new(Equation::Scaled { r }, self.set, self.eps, self.cfg, self.f))
                .collect::<Result<_>>()?,
            Columns::InitialData(fs) => fs
                .iter()
                .map(|f_n| Stepper::new(scaled, self.set, self.eps, self.cfg, f_n))
                .collect::<Result<_>>()?,
            Columns::EnergyBall => unreachable!(),
        };
        let mut sup: Vec<f64> = others.iter_mut().map(|o| sq_distance(&mut base, o)).collect();
        for step in 0..n {
            let dw = noise.step(step);
            if blown(base.advance(step, dw))?.is_none() {
                return Ok(None);
            }
            for (o, s) in others.iter_mut().zip(sup.iter_mut()) {
                if blown(o.advance(step, dw))?.is_none() {
                    return Ok(None);
                }
                *s = s.max(sq_distance(&mut base, o));
            }
        }
        Ok(Some(sup))
    }

    /// Per-column statistics over a path range; blow-ups become `+∞`.
    fn ensemble(&self, cols: &Columns<'_>, seed: u64, role: StreamRole, first: usize, n_paths: usize) -> Result<(Vec<Vec<f64>>, usize)> {
        let per_path = map_paths(n_paths, |i| {
            let noise = path_noise(self.set, seed, first + i, role, self.cfg.n_steps)?;
            self.path_values(cols, &noise)
        })?;
        let blowups = per_path.iter().filter(|v| v.is_none()).count();
        if blowups * 100 > n_paths {
            return Err(Error::TooManyBlowUps {
                blown: blowups,
                total: n_paths,
            });
        }
        let stats = (0..cols.len())
            .map(|c| {
                per_path
                    .iter()
                    .map(|v| v.as_ref().map_or(f64::INFINITY, |v| v[c]))
                    .collect()
            })
            .collect();
        Ok((stats, blowups))
    }
}

fn columns_of(kind: &TailKind) -> (Columns<'_>, usize) {
    match kind {
        TailKind::Equivalence => (Columns::Equivalence, 0),
        TailKind::EnergyBall => (Columns::EnergyBall, 0),
        TailKind::Smoothing { r } => (Columns::Smoothing(std::slice::from_ref(r)), 0),
        TailKind::InitialData { f_n } => (Columns::InitialData(std::slice::from_ref(f_n)), 0),
    }
}

/// Calibration scale from a separate pre-pass: the `quantile` of the pathwise
/// statistic (the median for the energy ball).
pub fn calibrate(
    kind: &TailKind,
    eps: f64,
    set: &CoefficientSet,
    f: &PeriodicField,
    cfg: &SolverConfig,
    opts: &McOptions,
) -> Result<f64> {
    check_eps(eps)?;
    let run = Run { set, f, eps, cfg, h1: opts.h1 };
    let (cols, c) = columns_of(kind);
    let (stats, _) = run.ensemble(&cols, opts.seed, StreamRole::Calibration, 0, opts.calibration_paths.max(1))?;
    let q = if matches!(kind, TailKind::EnergyBall) { 0.5 } else { opts.quantile };
    let v = quantile(&stats[c], q);
    if !(v > 0.0) || !v.is_finite() {
        return Err(Error::InvalidParameter {
            name: "threshold",
            reason: format!("calibration produced a degenerate scale {v}"),
        });
    }
    Ok(v)
}

/// One row for a single query.
pub fn tail_probability(
    query: &TailQuery,
    set: &CoefficientSet,
    f: &PeriodicField,
    cfg: &SolverConfig,
    opts: &McOptions,
) -> Result<ScanRow> {
    opts.check()?;
    let run = Run { set, f, eps: query.eps, cfg, h1: opts.h1 };
    let (cols, c) = columns_of(&query.kind);
    let (stats, blowups) = run.ensemble(&cols, opts.seed, StreamRole::Dynamics, opts.first_path, opts.n_paths)?;
    Ok(ScanRow::from_stats(query.eps, query.threshold, &stats[c], blowups))
}

/// Rows for nested events `{statistic > t}` over `thresholds` on one path set.
pub fn threshold_scan(
    kind: &TailKind,
    thresholds: &[f64],
    eps: f64,
    set: &CoefficientSet,
    f: &PeriodicField,
    cfg: &SolverConfig,
    opts: &McOptions,
) -> Result<LdpScanResult> {
    opts.check()?;
    check_eps(eps)?;
    thresholds.iter().try_for_each(|&t| check_threshold(t))?;
    let run = Run { set, f, eps, cfg, h1: opts.h1 };
    let (cols, c) = columns_of(kind);
    let (stats, blowups) = run.ensemble(&cols, opts.seed, StreamRole::Dynamics, opts.first_path, opts.n_paths)?;
    let rows = thresholds
        .iter()
        .map(|&t| ScanRow::from_stats(eps, t, &stats[c], blowups))
        .collect();
    Ok(LdpScanResult::new(kind.label(), rows, false))
}

fn strictly_decreasing(name: &'static str, xs: &[f64]) -> Result<()> {
    if xs.is_empty() || xs.windows(2).any(|w| !(w[1] < w[0])) {
        return Err(Error::InvalidParameter {
            name,
            reason: "must be a nonempty strictly decreasing list".into(),
        });
    }
    Ok(())
}

/// One row per `ε` (strictly decreasing). Without a threshold, it is calibrated at the first `ε`.
pub fn epsilon_scan(
    kind: &TailKind,
    threshold: Option<f64>,
    eps_list: &[f64],
    set: &CoefficientSet,
    f: &PeriodicField,
    cfg: &SolverConfig,
    opts: &McOptions,
) -> Result<LdpScanResult> {
    opts.check()?;
    strictly_decreasing("eps", eps_list)?;
    eps_list.iter().try_for_each(|&e| check_eps(e))?;
    let (threshold, calibrated) = match threshold {
        Some(t) => {
            check_threshold(t)?;
            (t, false)
        }
        None => (calibrate(kind, eps_list[0], set, f, cfg, opts)?, true),
    };
    let rows = eps_list
        .iter()
        .map(|&eps| tail_probability(&TailQuery::new(kind.clone(), threshold, eps)?, set, f, cfg, opts))
        .collect::<Result<_>>()?;
    Ok(LdpScanResult::new(kind.label(), rows, calibrated))
}

/// One row per mollification time `r` (strictly decreasing), all coupled to the same `u^ε`.
pub fn smoothing_scan(
    r_list: &[f64],
    eps: f64,
    delta: Option<f64>,
    set: &CoefficientSet,
    f: &PeriodicField,
    cfg: &SolverConfig,
    opts: &McOptions,
) -> Result<LdpScanResult> {
    opts.check()?;
    check_eps(eps)?;
    strictly_decreasing("r", r_list)?;
    if r_list.iter().any(|&r| !(r > 0.0)) {
        return Err(Error::InvalidParameter {
            name: "r",
            reason: "mollification times must be positive".into(),
        });
    }
    let (delta, calibrated) = match delta {
        Some(d) => {
            check_threshold(d)?;
            (d, false)
        }
        None => (calibrate(&TailKind::Smoothing { r: r_list[0] }, eps, set, f, cfg, opts)?, true),
    };
    let run = Run { set, f, eps, cfg, h1: opts.h1 };
    let (stats, blowups) = run.ensemble(&Columns::Smoothing(r_list), opts.seed, StreamRole::Dynamics, opts.first_path, opts.n_paths)?;
    let rows = stats.iter().map(|s| ScanRow::from_stats(eps, delta, s, blowups)).collect();
    Ok(LdpScanResult::new("smoothing", rows, calibrated))
}

/// One row per perturbed initial datum `f_n`; `‖f_n − f‖_H` must be nonincreasing.
pub fn initial_data_scan(
    f: &PeriodicField,
    f_n_list: &[PeriodicField],
    eps: f64,
    delta: Option<f64>,
    set: &CoefficientSet,
    cfg: &SolverConfig,
    opts: &McOptions,
) -> Result<LdpScanResult> {
    opts.check()?;
    check_eps(eps)?;
    if f_n_list.is_empty() {
        return Err(Error::InvalidParameter {
            name: "perturbations",
            reason: "need at least one perturbed initial datum".into(),
        });
    }
    let gaps = f_n_list
        .iter()
        .map(|g| Ok(g.sub(f)?.l2_norm()))
        .collect::<Result<Vec<f64>>>()?;
    if gaps.windows(2).any(|w| w[1] > w[0]) {
        return Err(Error::InvalidParameter {
            name: "perturbations",
            reason: "distances to f must be nonincreasing".into(),
        });
    }
    let (delta, calibrated) = match delta {
        Some(d) => {
            check_threshold(d)?;
            (d, false)
        }
        None => (
            calibrate(&TailKind::InitialData { f_n: f_n_list[0].clone() }, eps, set, f, cfg, opts)?,
            true,
        ),
    };
    let run = Run { set, f, eps, cfg, h1: opts.h1 };
    let (stats, blowups) = run.ensemble(&Columns::InitialData(f_n_list), opts.seed, StreamRole::Dynamics, opts.first_path, opts.n_paths)?;
    let rows = stats.iter().map(|s| ScanRow::from_stats(eps, delta, s, blowups)).collect();
    Ok(LdpScanResult::new("initial_data", rows, calibrated))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::coefficients::{build_set, DiffusionSpec, NoiseSpec};
    use crate::field::TorusGrid;
    use std::collections::BTreeMap;
    use std::f64::consts::PI;

    fn g() -> TorusGrid {
        TorusGrid::new(1, 16).unwrap()
    }

    fn sine() -> PeriodicField {
        g().sample(|x| (2.0 * PI * x[0]).sin())
    }

    fn additive() -> CoefficientSet {
        build_set("heat-additive", &BTreeMap::new()).unwrap()
    }

    fn cfg() -> SolverConfig {
        SolverConfig::new(g(), 200)
    }

    #[test]
    fn deterministic_pairs_give_zero_or_one() {
        let set = CoefficientSet::linear_heat(1);
        let opts = McOptions::new(100, 1);
        // the deterministic gap between u^ε and the frozen limit v = f
        let gap = {
            let row = tail_probability(&TailQuery::new(TailKind::Equivalence, 1e-300, 0.5).unwrap(), &set, &sine(), &cfg(), &opts).unwrap();
            row.median_statistic
        };
        assert!(gap > 0.0);
        let above = TailQuery::new(TailKind::Equivalence, gap * 1.01, 0.5).unwrap();
        let row = tail_probability(&above, &set, &sine(), &cfg(), &opts).unwrap();
        assert_eq!(row.p_hat, 0.0);
        assert!(row.censored);
        assert_eq!(row.eps_log_p, 0.5 * (3.0f64 / 100.0).ln());
        let below = TailQuery::new(TailKind::Equivalence, gap * 0.99, 0.5).unwrap();
        assert_eq!(tail_probability(&below, &set, &sine(), &cfg(), &opts).unwrap().p_hat, 1.0);
        let scan = epsilon_scan(&TailKind::Equivalence, Some(0.01), &[0.5, 0.2, 0.1], &set, &sine(), &cfg(), &opts).unwrap();
        assert!(scan.rows.iter().all(|r| r.p_hat == 0.0 || r.p_hat == 1.0));
    }

    #[test]
    fn unreachable_threshold_is_censored() {
        let q = TailQuery::new(TailKind::Equivalence, 1e6, 0.5).unwrap();
        let row = tail_probability(&q, &additive(), &sine(), &cfg(), &McOptions::new(100, 2)).unwrap();
        assert_eq!(row.hit_count, 0);
        assert!(row.eps_log_p.is_finite());
        assert_eq!(row.wilson_ci_low, 0.0);
    }

    #[test]
    fn inputs_are_validated() {
        let set = additive();
        assert!(TailQuery::new(TailKind::Equivalence, 0.0, 0.5).is_err());
        assert!(TailQuery::new(TailKind::Equivalence, 1.0, 1.5).is_err());
        let q = TailQuery::new(TailKind::Equivalence, 1.0, 0.5).unwrap();
        assert!(tail_probability(&q, &set, &sine(), &cfg(), &McOptions::new(10, 1)).is_err());
        let opts = McOptions::new(100, 1);
        assert!(epsilon_scan(&TailKind::Equivalence, Some(1.0), &[0.1, 0.2], &set, &sine(), &cfg(), &opts).is_err());
        assert!(smoothing_scan(&[0.01, 0.1], 0.5, Some(1.0), &set, &sine(), &cfg(), &opts).is_err());
        let far = sine().scale(2.0);
        assert!(initial_data_scan(&sine(), &[sine(), far], 0.5, Some(1.0), &set, &cfg(), &opts).is_err());
    }

    #[test]
    fn thresholds_give_nested_events() {
        let opts = McOptions::new(200, 3);
        let scan = threshold_scan(&TailKind::EnergyBall, &[0.55, 0.6, 0.7, 0.9], 0.2, &additive(), &sine(), &cfg(), &opts).unwrap();
        for w in scan.rows.windows(2) {
            assert!(w[1].hit_count <= w[0].hit_count);
        }
    }

    #[test]
    fn energy_ball_is_stable_across_seeds() {
        let set = additive();
        let f = sine();
        let m = 2.0 * (f.l2_norm().powi(2) + set.noise.growth);
        let q = TailQuery::new(TailKind::EnergyBall, m, 0.1).unwrap();
        let a = tail_probability(&q, &set, &f, &cfg(), &McOptions::new(1000, 1)).unwrap();
        let b = tail_probability(&q, &set, &f, &cfg(), &McOptions::new(1000, 2)).unwrap();
        assert!(a.p_hat < 0.05);
        assert!(a.wilson_ci_low <= b.wilson_ci_high && b.wilson_ci_low <= a.wilson_ci_high);
    }

    #[test]
    fn disjoint_halves_overlap() {
        let set = additive();
        let kind = TailKind::Equivalence;
        let base = McOptions::new(150, 5);
        let delta = calibrate(&kind, 0.2, &set, &sine(), &cfg(), &base).unwrap();
        let mut second = base.clone();
        second.first_path = 150;
        let a = epsilon_scan(&kind, Some(delta), &[0.2, 0.1], &set, &sine(), &cfg(), &base).unwrap();
        let b = epsilon_scan(&kind, Some(delta), &[0.2, 0.1], &set, &sine(), &cfg(), &second).unwrap();
        for (x, y) in a.rows.iter().zip(&b.rows) {
            assert!(x.wilson_ci_low <= y.wilson_ci_high && y.wilson_ci_low <= x.wilson_ci_high);
        }
    }

    #[test]
    fn constant_diffusion_smoothing_is_exact() {
        let set = additive();
        let scan = smoothing_scan(&[0.1, 0.05], 0.5, Some(1e-30), &set, &sine(), &cfg(), &McOptions::new(100, 1)).unwrap();
        assert!(scan.rows.iter().all(|r| r.hit_count == 0 && r.median_statistic == 0.0));
    }

    #[test]
    fn variable_diffusion_smoothing_shrinks_with_r() {
        let set = additive().with_diffusion(DiffusionSpec::sin_modulated(0.5).unwrap());
        let f = g().sample(|x| (2.0 * PI * x[0]).sin() + 0.5 * (4.0 * PI * x[0]).cos());
        let scan = smoothing_scan(&[0.1, 0.05, 0.025], 0.5, Some(1e-30), &set, &f, &cfg(), &McOptions::new(100, 4)).unwrap();
        let med: Vec<f64> = scan.rows.iter().map(|r| r.median_statistic).collect();
        assert!(med[0] > med[1] && med[1] > med[2], "{med:?}");
        // a deterministic positive gap at large r puts every path above a tiny δ
        assert_eq!(scan.rows[0].p_hat, 1.0);
    }

    #[test]
    fn initial_data_examples() {
        let set = build_set("heat-sin", &BTreeMap::new()).unwrap();
        let f = sine();
        let opts = McOptions::new(100, 8);
        let same = initial_data_scan(&f, std::slice::from_ref(&f), 0.5, Some(1e-12), &set, &cfg(), &opts).unwrap();
        assert_eq!(same.rows[0].hit_count, 0);
        let bump = |c: f64| f.add(&g().sample(|x| c * (2.0 * PI * x[0]).cos())).unwrap();
        let list = [bump(0.4), bump(0.4 / 2f64.sqrt()), bump(0.2)];
        let scan = initial_data_scan(&f, &list, 0.5, Some(1e-12), &set, &cfg(), &opts).unwrap();
        let med: Vec<f64> = scan.rows.iter().map(|r| r.median_statistic).collect();
        for w in med.windows(2) {
            assert!((w[1] / w[0] - 0.5).abs() < 0.1, "{med:?}");
        }
        // δ below the initial gap is violated at t = 0
        let gap0 = 0.2f64.powi(2) / 2.0;
        let scan = initial_data_scan(&f, &[bump(0.2)], 0.5, Some(gap0 * 0.99), &set, &cfg(), &opts).unwrap();
        assert_eq!(scan.rows[0].p_hat, 1.0);
    }

    #[test]
    fn blowups_are_counted_and_capped() {
        let set = CoefficientSet::linear_heat(1).with_noise(
            NoiseSpec::new(crate::coefficients::ScalarMap::Linear(1.0), vec![60.0], crate::coefficients::SpatialBasis::Uniform)
                .unwrap(),
        );
        let q = TailQuery::new(TailKind::EnergyBall, 1.0, 1.0).unwrap();
        let r = tail_probability(&q, &set, &g().constant(1.0), &SolverConfig::new(g(), 50), &McOptions::new(100, 1));
        assert!(matches!(r, Err(Error::TooManyBlowUps { .. })), "{r:?}");
    }

    #[test]
    fn csv_has_frozen_columns() {
        let set = additive();
        let scan = epsilon_scan(&TailKind::Equivalence, Some(1e-3), &[0.4, 0.2, 0.1, 0.05], &set, &sine(), &cfg(), &McOptions::new(100, 1)).unwrap();
        let mut buf = Vec::new();
        scan.write_csv(&mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        let lines: Vec<&str> = text.lines().collect();
        assert!(lines[0].starts_with('#'));
        assert_eq!(lines[1], SCAN_COLUMNS.join(","));
        assert_eq!(lines.len(), 6);
        assert!(lines[2..].iter().all(|l| l.split(',').count() == 8));
    }
}
