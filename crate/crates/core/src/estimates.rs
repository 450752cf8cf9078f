//! A priori functionals over trajectories: energy, moments, exit times, the
//! mollified absolute value and the coupled L¹ contraction experiment.

use std::io::Write;

use crate::coefficients::CoefficientSet;
use crate::ensemble::{map_paths, path_noise};
use crate::error::{Error, Result};
use crate::field::PeriodicField;
use crate::noise::StreamRole;
use crate::solver::{l1_distance, Equation, SolverConfig, Stepper, Trajectory};
use crate::stats::{pairwise_sum, Estimate};

/// How `‖u‖²_{H¹}` is measured in energy functionals.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum H1Convention {
    /// `‖u‖²_H + ‖Du‖²_H`.
    Bessel,
    /// `‖Du‖²_H` only.
    #[default]
    Seminorm,
}

impl H1Convention {
    pub fn h1_sq(self, l2_sq: f64, semi_sq: f64) -> f64 {
        match self {
            Self::Bessel => l2_sq + semi_sq,
            Self::Seminorm => semi_sq,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EnergyRecord {
    /// `sup_t ‖u(t)‖²_H`.
    pub sup_h_norm_sq: f64,
    /// `ερ ∫₀¹ ‖u(t)‖²_{H¹} dt`.
    pub dissipation: f64,
    pub total: f64,
}

/// Trapezoid sum over the step grid.
fn trapezoid(values: impl Iterator<Item = f64>, dt: f64) -> Vec<f64> {
    let mut out = Vec::new();
    let mut acc = 0.0;
    let mut prev: Option<f64> = None;
    for v in values {
        if let Some(p) = prev {
            acc += 0.5 * dt * (p + v);
        }
        out.push(acc);
        prev = Some(v);
    }
    out
}

fn h1_series(traj: &Trajectory, conv: H1Convention) -> impl Iterator<Item = f64> + '_ {
    traj.diagnostics
        .iter()
        .map(move |d| conv.h1_sq(d.l2_norm * d.l2_norm, d.h1_seminorm * d.h1_seminorm))
}

/// Energy functional of a scaled trajectory, using every step.
pub fn energy_functional(traj: &Trajectory, eps: f64, rho: f64, conv: H1Convention) -> EnergyRecord {
    let sup = traj.diagnostics.iter().map(|d| d.l2_norm * d.l2_norm).fold(0.0, f64::max);
    let integral = *trapezoid(h1_series(traj, conv), traj.dt).last().unwrap_or(&0.0);
    let dissipation = eps * rho * integral;
    EnergyRecord {
        sup_h_norm_sq: sup,
        dissipation,
        total: sup + dissipation,
    }
}

/// `‖u(t)‖²_H + ερ ∫₀ᵗ ‖u‖²_{H¹}` at every step; nonincreasing for noiseless runs.
pub fn running_energy(traj: &Trajectory, eps: f64, rho: f64, conv: H1Convention) -> Vec<f64> {
    let diss = trapezoid(h1_series(traj, conv), traj.dt);
    traj.diagnostics
        .iter()
        .zip(diss)
        .map(|(d, i)| d.l2_norm * d.l2_norm + eps * rho * i)
        .collect()
}

/// Per-path moment functionals accumulated step by step.
#[derive(Debug, Clone, PartialEq)]
pub struct PathMoments {
    p: u32,
    dt: f64,
    sup: f64,
    weighted: f64,
    integral: f64,
    prev: Option<(f64, f64)>,
}

impl PathMoments {
    pub fn new(p: u32, dt: f64) -> Self {
        Self {
            p,
            dt,
            sup: 0.0,
            weighted: 0.0,
            integral: 0.0,
            prev: None,
        }
    }

    /// Feed `‖u‖²_H` and `‖u‖²_{H¹}` at the next step.
    pub fn push(&mut self, l2_sq: f64, h1_sq: f64) {
        let p = self.p as i32;
        self.sup = self.sup.max(l2_sq.powi(p));
        let w = l2_sq.powi(p - 1) * h1_sq;
        if let Some((pw, ph)) = self.prev {
            self.weighted += 0.5 * self.dt * (pw + w);
            self.integral += 0.5 * self.dt * (ph + h1_sq);
        }
        self.prev = Some((w, h1_sq));
    }

    /// `(sup ‖u‖^{2p}, ∫‖u‖^{2(p−1)}‖u‖²_{H¹}, (∫‖u‖²_{H¹})^p)`.
    pub fn finish(&self) -> [f64; 3] {
        [self.sup, self.weighted, self.integral.powi(self.p as i32)]
    }
}

/// Monte Carlo estimates of the three moment functionals.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MomentEstimates {
    pub sup: Estimate,
    pub dissipation: Estimate,
    pub integral_power: Estimate,
}

impl MomentEstimates {
    pub fn from_samples(samples: &[[f64; 3]]) -> Self {
        let col = |i: usize| samples.iter().map(|s| s[i]).collect::<Vec<_>>();
        Self {
            sup: Estimate::from_samples(&col(0)),
            dissipation: Estimate::from_samples(&col(1)),
            integral_power: Estimate::from_samples(&col(2)),
        }
    }
}

pub fn path_moments(traj: &Trajectory, p: u32, conv: H1Convention) -> [f64; 3] {
    let mut m = PathMoments::new(p, traj.dt);
    for d in &traj.diagnostics {
        let l2 = d.l2_norm * d.l2_norm;
        m.push(l2, conv.h1_sq(l2, d.h1_seminorm * d.h1_seminorm));
    }
    m.finish()
}

pub fn moment_estimator(ensemble: &[Trajectory], p: u32, conv: H1Convention) -> Result<MomentEstimates> {
    if ensemble.is_empty() {
        return Err(Error::InvalidParameter {
            name: "ensemble",
            reason: "empty ensemble".into(),
        });
    }
    if p == 0 {
        return Err(Error::InvalidParameter {
            name: "p",
            reason: "moment order must be >= 1".into(),
        });
    }
    let first = &ensemble[0];
    if ensemble
        .iter()
        .any(|t| t.grid != first.grid || t.dt != first.dt || t.eps != first.eps)
    {
        return Err(Error::InvalidParameter {
            name: "ensemble",
            reason: "trajectories come from different configurations".into(),
        });
    }
    let samples: Vec<[f64; 3]> = ensemble.iter().map(|t| path_moments(t, p, conv)).collect();
    Ok(MomentEstimates::from_samples(&samples))
}

/// Moments of the scaled equation over `n_paths` coupled-by-index paths,
/// without storing trajectories.
pub fn simulate_moments(
    f: &PeriodicField,
    eps: f64,
    set: &CoefficientSet,
    cfg: &SolverConfig,
    p: u32,
    conv: H1Convention,
    n_paths: usize,
    seed: u64,
) -> Result<Vec<[f64; 3]>> {
    map_paths(n_paths, |i| {
        let noise = path_noise(set, seed, i, StreamRole::Dynamics, cfg.n_steps)?;
        let mut st = Stepper::new(Equation::Scaled { r: 0.0 }, set, eps, cfg, f)?;
        let mut m = PathMoments::new(p, cfg.dt());
        let mut push = |st: &mut Stepper<'_>| {
            let l2 = st.l2_sq();
            let semi = st.h1_semi_sq();
            m.push(l2, conv.h1_sq(l2, semi));
        };
        push(&mut st);
        for step in 0..cfg.n_steps {
            st.advance(step, noise.step(step))?;
            push(&mut st);
        }
        Ok(m.finish())
    })
}

/// Upper bound on `E[sup ‖u‖^{2p}_H + 2pρ ∫‖u‖^{2(p−1)}_H ‖u‖²_{H¹} dt]` for the
/// unscaled equation, from the growth constant `C` and ellipticity `ρ`.
pub fn gronwall_energy_bound(f_norm_sq: f64, c: f64, rho: f64, p: u32) -> f64 {
    let p = p as f64;
    let rate = 2.0 * p * c / rho + 2.0 * p * c + 4.0 * p * (p - 1.0) * c;
    (2.0 * f_norm_sq.powf(p) + rate) * rate.exp()
}

/// First step time at which `‖u‖²_H > M` or `ερ∫₀ᵗ‖u‖²_{H¹} > M`; `None` if never.
pub fn first_exit_time(traj: &Trajectory, eps: f64, rho: f64, m: f64, conv: H1Convention) -> Option<f64> {
    let diss = trapezoid(h1_series(traj, conv), traj.dt);
    traj.diagnostics
        .iter()
        .zip(diss)
        .find(|(d, i)| d.l2_norm * d.l2_norm > m || eps * rho * i > m)
        .map(|(d, _)| d.t)
}

#[derive(Debug, Clone, Copy, PartialEq)]
enum Piece {
    /// `ψ(y) = α + βy` on `[lo, hi]`.
    Linear { lo: f64, hi: f64, alpha: f64, beta: f64 },
    /// `ψ(y) = κ / y` on `[lo, hi]`.
    Cap { lo: f64, hi: f64, kappa: f64 },
}

impl Piece {
    fn bounds(&self) -> (f64, f64) {
        match *self {
            Piece::Linear { lo, hi, .. } | Piece::Cap { lo, hi, .. } => (lo, hi),
        }
    }

    fn eval(&self, y: f64) -> f64 {
        match *self {
            Piece::Linear { alpha, beta, .. } => alpha + beta * y,
            Piece::Cap { kappa, .. } => kappa / y,
        }
    }

    /// `∫_lo^x ψ` and `∫_lo^x yψ` for `x` inside the piece.
    fn moments(&self, x: f64) -> (f64, f64) {
        match *self {
            Piece::Linear { lo, alpha, beta, .. } => (
                alpha * (x - lo) + beta * (x * x - lo * lo) / 2.0,
                alpha * (x * x - lo * lo) / 2.0 + beta * (x.powi(3) - lo.powi(3)) / 3.0,
            ),
            Piece::Cap { lo, kappa, .. } => (kappa * (x / lo).ln(), kappa * (x - lo)),
        }
    }
}

/// The sequence `a_m = e^{−m(m+1)/2}` and the profile `ψ_m` supported on `(a_m, a_{m−1})`.
///
/// `ψ_m` is the unit-mass tent on the support when that respects `ψ ≤ 2/(m r)`;
/// otherwise it is `min(c·tent, 2/(m r))` with `c` chosen for unit mass.
#[derive(Debug, Clone, PartialEq)]
pub struct MollifierParams {
    pub m: u32,
    /// `a_0, …, a_m`.
    pub a_sequence: Vec<f64>,
    pieces: Vec<Piece>,
    /// Prefix values of `(∫ψ, ∫yψ)` at the start of each piece.
    prefix: Vec<(f64, f64)>,
    total: (f64, f64),
    capped: bool,
}

pub fn a_term(m: u32) -> f64 {
    (-(m as f64) * (m as f64 + 1.0) / 2.0).exp()
}

fn profile_pieces(a: f64, b: f64, kappa: f64, c: f64) -> Vec<Piece> {
    let half = (b - a) / 2.0;
    let mid = (a + b) / 2.0;
    let s = c / (half * half);
    let rising = (-s * a, s);
    let falling = (s * b, -s);
    let mut cuts = vec![a, mid, b];
    for (alpha, beta) in [rising, falling] {
        // βy² + αy − κ = 0 where the linear part meets the cap
        let disc = alpha * alpha + 4.0 * beta * kappa;
        if disc >= 0.0 {
            for sign in [-1.0, 1.0] {
                let y = (-alpha + sign * disc.sqrt()) / (2.0 * beta);
                if y > a && y < b {
                    cuts.push(y);
                }
            }
        }
    }
    cuts.sort_by(f64::total_cmp);
    cuts.dedup();
    cuts.windows(2)
        .filter(|w| w[1] > w[0])
        .map(|w| {
            let (lo, hi) = (w[0], w[1]);
            let y = 0.5 * (lo + hi);
            let (alpha, beta) = if y < mid { rising } else { falling };
            if alpha + beta * y <= kappa / y {
                Piece::Linear { lo, hi, alpha, beta }
            } else {
                Piece::Cap { lo, hi, kappa }
            }
        })
        .collect()
}

fn mass(pieces: &[Piece]) -> f64 {
    pieces.iter().map(|p| p.moments(p.bounds().1).0).sum()
}

impl MollifierParams {
    pub fn new(m: u32) -> Result<Self> {
        if m == 0 {
            return Err(Error::InvalidParameter {
                name: "m",
                reason: "mollifier index must be >= 1".into(),
            });
        }
        let a_sequence: Vec<f64> = (0..=m).map(a_term).collect();
        let (a, b) = (a_sequence[m as usize], a_sequence[m as usize - 1]);
        let kappa = 2.0 / m as f64;
        let capped = profile_pieces(a, b, kappa, 1.0)
            .iter()
            .any(|p| matches!(p, Piece::Cap { .. }));
        let c = if !capped {
            1.0
        } else {
            let (mut lo, mut hi) = (1.0, 2.0);
            while mass(&profile_pieces(a, b, kappa, hi)) < 1.0 {
                hi *= 2.0;
            }
            for _ in 0..200 {
                let mid = 0.5 * (lo + hi);
                if mass(&profile_pieces(a, b, kappa, mid)) < 1.0 {
                    lo = mid;
                } else {
                    hi = mid;
                }
            }
            lo
        };
        let pieces = profile_pieces(a, b, kappa, c);
        let mut prefix = Vec::with_capacity(pieces.len());
        let mut acc = (0.0, 0.0);
        for p in &pieces {
            prefix.push(acc);
            let (m0, m1) = p.moments(p.bounds().1);
            acc = (acc.0 + m0, acc.1 + m1);
        }
        let out = Self {
            m,
            a_sequence,
            pieces,
            prefix,
            total: acc,
            capped,
        };
        // profile bound on a dense grid of the support
        for i in 0..=1000 {
            let y = a + (b - a) * i as f64 / 1000.0;
            if out.psi(y) > kappa / y * (1.0 + 1e-12) {
                return Err(Error::InvalidParameter {
                    name: "m",
                    reason: format!("profile exceeds 2/(m r) at r = {y}"),
                });
            }
        }
        Ok(out)
    }

    /// Left end `a_m` of the support.
    pub fn lower(&self) -> f64 {
        self.a_sequence[self.m as usize]
    }

    /// Right end `a_{m−1}` of the support.
    pub fn upper(&self) -> f64 {
        self.a_sequence[self.m as usize - 1]
    }

    /// Whether the cap `2/(m r)` is active somewhere.
    pub fn is_capped(&self) -> bool {
        self.capped
    }

    /// `ψ_m(r)`, extended evenly.
    pub fn psi(&self, r: f64) -> f64 {
        let r = r.abs();
        self.pieces
            .iter()
            .find(|p| {
                let (lo, hi) = p.bounds();
                r >= lo && r <= hi
            })
            .map_or(0.0, |p| p.eval(r))
    }

    /// `(∫₀ʸψ, ∫₀ʸ rψ)` for `y ≥ 0`.
    fn cumulative(&self, y: f64) -> (f64, f64) {
        if y <= self.lower() {
            return (0.0, 0.0);
        }
        if y >= self.upper() {
            return self.total;
        }
        let i = self.pieces.iter().rposition(|p| p.bounds().0 <= y).unwrap_or(0);
        let (m0, m1) = self.pieces[i].moments(y);
        (self.prefix[i].0 + m0, self.prefix[i].1 + m1)
    }

    /// `φ_m(x) = ∫₀^{|x|}∫₀^y ψ_m`.
    pub fn phi(&self, x: f64) -> f64 {
        let y = x.abs();
        if y >= self.upper() {
            return y - self.total.1;
        }
        let (m0, m1) = self.cumulative(y);
        (y * m0 - m1).max(0.0)
    }

    pub fn phi_prime(&self, x: f64) -> f64 {
        let d = self.cumulative(x.abs()).0.min(1.0);
        if x < 0.0 {
            -d
        } else {
            d
        }
    }

    pub fn phi_second(&self, x: f64) -> f64 {
        self.psi(x)
    }

    /// `(m, x, φ_m(x))` rows over `xs`.
    pub fn write_csv<W: Write>(&self, mut w: W, xs: &[f64]) -> std::io::Result<()> {
        writeln!(w, "m,x,phi")?;
        for &x in xs {
            writeln!(w, "{},{},{}", self.m, x, self.phi(x))?;
        }
        Ok(())
    }
}

pub fn mollified_abs(x: f64, m: u32) -> Result<f64> {
    Ok(MollifierParams::new(m)?.phi(x))
}

/// Grid quadrature of `φ_m(u − v)`.
pub fn mollified_l1(u: &PeriodicField, v: &PeriodicField, m: u32) -> Result<f64> {
    let d = u.sub(v)?;
    let params = MollifierParams::new(m)?;
    Ok(d.values().iter().map(|&x| params.phi(x)).sum::<f64>() / d.values().len() as f64)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ContractionReport {
    /// Estimate of `E∫₀¹ ‖u^{ε,k} − u^ε‖_{L¹} dt`.
    pub lhs: Estimate,
    /// `‖f_k − f‖_{L¹}`.
    pub rhs: f64,
    pub pass: bool,
}

/// Coupled runs from `f` and `f_k`; passes when `lhs ≤ 1.05·rhs + 3 SE`.
pub fn l1_contraction_test(
    f: &PeriodicField,
    f_k: &PeriodicField,
    eps: f64,
    set: &CoefficientSet,
    cfg: &SolverConfig,
    n_paths: usize,
    seed: u64,
) -> Result<ContractionReport> {
    let rhs = f_k.sub(f)?.lp_norm(1.0)?;
    let samples = map_paths(n_paths, |i| {
        let noise = path_noise(set, seed, i, StreamRole::Dynamics, cfg.n_steps)?;
        let mut a = Stepper::new(Equation::Scaled { r: 0.0 }, set, eps, cfg, f)?;
        let mut b = Stepper::new(Equation::Scaled { r: 0.0 }, set, eps, cfg, f_k)?;
        let mut dist = Vec::with_capacity(cfg.n_steps + 1);
        dist.push(l1_distance(&mut a, &mut b));
        for step in 0..cfg.n_steps {
            a.advance(step, noise.step(step))?;
            b.advance(step, noise.step(step))?;
            dist.push(l1_distance(&mut a, &mut b));
        }
        Ok(*trapezoid(dist.into_iter(), cfg.dt()).last().unwrap_or(&0.0))
    })?;
    let lhs = Estimate::from_samples(&samples);
    let pass = lhs.mean <= rhs * 1.05 + 3.0 * lhs.se;
    Ok(ContractionReport { lhs, rhs, pass })
}

/// One sample of a discrete martingale: running maximum of `|M|` and final `⟨M⟩`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MartingaleSample {
    pub max_abs: f64,
    pub quad_variation: f64,
}

impl MartingaleSample {
    /// The energy martingale recorded in a trajectory's diagnostics.
    pub fn from_trajectory(traj: &Trajectory) -> Self {
        Self {
            max_abs: traj.diagnostics.iter().map(|d| d.martingale.abs()).fold(0.0, f64::max),
            quad_variation: traj.diagnostics.last().map_or(0.0, |d| d.quad_variation),
        }
    }
}

/// `max_{p∈{2,4,8}} (E|M*|^p)^{1/p} / (√p (E⟨M⟩^{p/2})^{1/p})`; zero martingales give 0.
pub fn bdg_constant_probe(samples: &[MartingaleSample]) -> f64 {
    let mut best = 0.0_f64;
    for p in [2i32, 4, 8] {
        let num: Vec<f64> = samples.iter().map(|s| s.max_abs.powi(p)).collect();
        let den: Vec<f64> = samples.iter().map(|s| s.quad_variation.powf(p as f64 / 2.0)).collect();
        let (num, den) = (pairwise_sum(&num), pairwise_sum(&den));
        if den <= 0.0 || num <= 0.0 {
            continue;
        }
        let pf = p as f64;
        let n = samples.len() as f64;
        let ratio = (num / n).powf(1.0 / pf) / (pf.sqrt() * (den / n).powf(1.0 / pf));
        best = best.max(ratio);
    }
    best
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::coefficients::{NoiseSpec, ScalarMap, SpatialBasis};
    use crate::field::TorusGrid;
    use crate::noise::NoisePath;
    use crate::solver::solve_scaled;
    use approx::assert_abs_diff_eq;
    use proptest::prelude::*;
    use std::f64::consts::PI;

    fn heat_run(eps: f64, n_steps: usize) -> Trajectory {
        let g = TorusGrid::new(1, 16).unwrap();
        let f = g.sample(|x| (2.0 * PI * x[0]).sin());
        let cfg = SolverConfig::new(g, n_steps);
        solve_scaled(&f, eps, &CoefficientSet::linear_heat(1), &NoisePath::zeros(1, n_steps), &cfg, 0.0).unwrap()
    }

    #[test]
    fn zero_solution_has_zero_energy() {
        let g = TorusGrid::new(1, 16).unwrap();
        let cfg = SolverConfig::new(g, 50);
        let tr = solve_scaled(&g.zeros(), 1.0, &CoefficientSet::linear_heat(1), &NoisePath::zeros(1, 50), &cfg, 0.0)
            .unwrap();
        assert_eq!(energy_functional(&tr, 1.0, 1.0, H1Convention::Bessel).total, 0.0);
    }

    #[test]
    fn heat_energy_matches_exact_decay() {
        let tr = heat_run(1.0, 20_000);
        let e = energy_functional(&tr, 1.0, 1.0, H1Convention::Seminorm);
        assert_abs_diff_eq!(e.sup_h_norm_sq, 0.5, epsilon = 1e-12);
        // ∫₀¹ e^{−8π²t}(2π)²/2 dt
        let exact = 4.0 * PI * PI * 0.5 * (1.0 - (-8.0 * PI * PI).exp()) / (8.0 * PI * PI);
        assert!((e.dissipation / exact - 1.0).abs() < 5e-3, "{} vs {exact}", e.dissipation);
        assert_eq!(e.total, e.sup_h_norm_sq + e.dissipation);
    }

    #[test]
    fn dissipation_scales_with_eps_when_decay_is_slow() {
        let d = |eps| energy_functional(&heat_run(eps, 400), eps, 1.0, H1Convention::Seminorm).dissipation;
        let ratio = d(0.02) / d(0.01);
        // exact dissipation is (1 − e^{−8π²ε})/4, which is ≈ linear in ε only while 8π²ε is small
        let exact = |eps: f64| 1.0 - (-8.0 * PI * PI * eps).exp();
        assert!((ratio / (exact(0.02) / exact(0.01)) - 1.0).abs() < 0.01, "{ratio}");
        let slow = d(0.0002) / d(0.0001);
        assert!((slow - 2.0).abs() < 0.02, "{slow}");
    }

    #[test]
    fn running_energy_is_nonincreasing_without_noise() {
        let g = TorusGrid::new(1, 32).unwrap();
        let set = crate::coefficients::build_set("quasilinear-sin", &Default::default())
            .unwrap()
            .with_noise(NoiseSpec::zero());
        let cfg = SolverConfig::new(g, 500);
        let f = g.sample(|x| (2.0 * PI * x[0]).sin() + 0.5 * (6.0 * PI * x[0]).cos());
        let tr = solve_scaled(&f, 0.3, &set, &NoisePath::zeros(1, 500), &cfg, 0.0).unwrap();
        let e = running_energy(&tr, 0.3, set.diffusion.rho, H1Convention::Seminorm);
        for w in e.windows(2) {
            assert!(w[1] <= w[0] + 1e-12);
        }
    }

    #[test]
    fn exit_time_examples() {
        let tr = heat_run(1.0, 10_000);
        assert_eq!(first_exit_time(&tr, 1.0, 1.0, 10.0, H1Convention::Seminorm), None);
        assert_eq!(first_exit_time(&tr, 1.0, 1.0, 0.0, H1Convention::Seminorm), Some(0.0));
        // with ρ = 4 the dissipation is 1 − e^{−8π²t}; cross M = 0.7
        let m = 0.7;
        let t_star = -(1.0f64 - m).ln() / (8.0 * PI * PI);
        let t = first_exit_time(&tr, 1.0, 4.0, m, H1Convention::Seminorm).unwrap();
        assert!((t - t_star).abs() <= 2e-4, "{t} vs {t_star}");
    }

    #[test]
    fn deterministic_moments_are_the_path_values() {
        let tr = heat_run(0.5, 200);
        let est = moment_estimator(&[tr.clone(), tr.clone()], 2, H1Convention::Bessel).unwrap();
        let v = path_moments(&tr, 2, H1Convention::Bessel);
        assert_eq!(est.sup.mean, v[0]);
        assert_eq!(est.dissipation.mean, v[1]);
        assert_eq!(est.integral_power.mean, v[2]);
        assert_eq!(est.sup.se, 0.0);
        assert!(moment_estimator(&[], 1, H1Convention::Bessel).is_err());
    }

    #[test]
    fn additive_dissipation_moment_matches_ou_sum() {
        // f = 0, Fourier noise: E‖Du(t)‖² = Σ_k q_k² ε 4π²|κ_k|² (1 − e^{−2λ_kεt}) / (2λ_kε)
        let g = TorusGrid::new(1, 16).unwrap();
        let q = vec![0.5, 0.25, 0.125];
        let set = CoefficientSet::linear_heat(1)
            .with_noise(NoiseSpec::new(ScalarMap::Constant(1.0), q.clone(), SpatialBasis::Fourier).unwrap());
        let eps = 0.25;
        let cfg = SolverConfig::new(g, 2000);
        let samples = simulate_moments(&g.zeros(), eps, &set, &cfg, 1, H1Convention::Seminorm, 2000, 11).unwrap();
        let est = MomentEstimates::from_samples(&samples);
        let mut exact = 0.0;
        for (k, qk) in q.iter().enumerate() {
            let (wave, _) = crate::coefficients::fourier_profile(k, 1);
            let lam = 4.0 * PI * PI * (wave[0] * wave[0]) as f64;
            if lam == 0.0 {
                continue;
            }
            // ∫₀¹ (1 − e^{−2λεt})/(2λε) dt
            let integral = (1.0 - (1.0 - (-2.0 * lam * eps).exp()) / (2.0 * lam * eps)) / (2.0 * lam * eps);
            exact += qk * qk * eps * lam * integral;
        }
        assert!((est.dissipation.mean - exact).abs() < 3.0 * est.dissipation.se + 0.01 * exact,
            "{:?} vs {exact}", est.dissipation);
        // E sup ‖u‖² dominates E‖u(1)‖²
        let mut final_sq = 0.0;
        for (k, qk) in q.iter().enumerate() {
            let (wave, _) = crate::coefficients::fourier_profile(k, 1);
            let lam = 4.0 * PI * PI * (wave[0] * wave[0]) as f64;
            final_sq += qk * qk * eps * if lam == 0.0 { 1.0 } else { (1.0 - (-2.0 * lam * eps).exp()) / (2.0 * lam * eps) };
        }
        assert!(est.sup.mean > final_sq);
    }

    #[test]
    fn gronwall_bound_at_p1() {
        let g = gronwall_energy_bound(0.5, 0.25, 0.5, 1);
        assert_abs_diff_eq!(g, (1.0 + 1.0 + 0.5) * 1.5f64.exp(), epsilon = 1e-12);
    }

    #[test]
    fn a_sequence_values() {
        assert_abs_diff_eq!(a_term(1), 0.36788, epsilon = 1e-5);
        assert_abs_diff_eq!(a_term(2), 0.049787, epsilon = 1e-6);
        for m in 1..=6u32 {
            let lhs = a_term(m - 1).ln() - a_term(m).ln();
            assert_abs_diff_eq!(lhs, m as f64, epsilon = 1e-12);
        }
    }

    #[test]
    fn mollifier_shape() {
        for m in 1..=6u32 {
            let p = MollifierParams::new(m).unwrap();
            assert_eq!(p.phi(0.0), 0.0);
            // unit mass: φ' reaches 1 past the support
            assert_abs_diff_eq!(p.phi_prime(2.0), 1.0, epsilon = 1e-12);
            for i in 0..=10_000 {
                let x = -1.5 + 3.0 * i as f64 / 10_000.0;
                assert_eq!(p.phi(x), p.phi(-x));
                assert!(p.phi_prime(x).abs() <= 1.0);
                let s = p.phi_second(x);
                assert!(s >= 0.0);
                if x != 0.0 {
                    assert!(s <= 2.0 / (m as f64 * x.abs()) * (1.0 + 1e-12));
                }
                let dev = (p.phi(x) - x.abs()).abs().min(1.0);
                assert!(dev <= p.upper() + 1e-15);
            }
            // deviation bound beyond the support
            let x = p.upper() * 1.5;
            assert!(x - p.phi(x) <= p.upper());
        }
        assert!(MollifierParams::new(1).unwrap().is_capped());
        assert!(MollifierParams::new(0).is_err());
    }

    #[test]
    fn mollifier_closed_form_matches_quadrature() {
        let p = MollifierParams::new(3).unwrap();
        let x = 0.8 * p.upper() + 0.2 * p.lower();
        // nested midpoint rule for ∫₀ˣ∫₀ʸψ
        let n = 20_000;
        let h = x / n as f64;
        let mut inner = 0.0;
        let mut outer = 0.0;
        for i in 0..n {
            let y = (i as f64 + 0.5) * h;
            let before = inner;
            inner += p.psi(y) * h;
            outer += 0.5 * (before + inner) * h;
        }
        assert!((p.phi(x) - outer).abs() < 1e-7, "{} vs {outer}", p.phi(x));
    }

    #[test]
    fn mollifier_increases_with_m() {
        let ps: Vec<_> = (1..=6).map(|m| MollifierParams::new(m).unwrap()).collect();
        for i in 0..=2000 {
            let x = 1.2 * i as f64 / 2000.0;
            for w in ps.windows(2) {
                assert!(w[1].phi(x) >= w[0].phi(x) - 1e-15);
                assert!(w[1].phi(x) <= x + 1e-15);
            }
        }
    }

    #[test]
    fn contraction_examples() {
        let g = TorusGrid::new(1, 16).unwrap();
        let set = CoefficientSet::linear_heat(1);
        let cfg = SolverConfig::new(g, 1000);
        let f = g.sample(|x| (2.0 * PI * x[0]).sin());
        let same = l1_contraction_test(&f, &f, 0.5, &set, &cfg, 4, 1).unwrap();
        assert_eq!(same.lhs.mean, 0.0);
        assert_eq!(same.rhs, 0.0);
        assert!(same.pass);
        // the difference c·cos(2πx) decays like e^{−4π²εt}
        let c = 0.1;
        let fk = f.add(&g.sample(|x| c * (2.0 * PI * x[0]).cos())).unwrap();
        let rep = l1_contraction_test(&f, &fk, 0.5, &set, &cfg, 2, 1).unwrap();
        let lam = 4.0 * PI * PI * 0.5;
        let exact = rep.rhs * (1.0 - (-lam).exp()) / lam;
        assert!((rep.lhs.mean / exact - 1.0).abs() < 2e-2, "{} vs {exact}", rep.lhs.mean);
        assert!(rep.lhs.mean < rep.rhs && rep.pass);
    }

    #[test]
    fn bdg_probe_examples() {
        assert_eq!(bdg_constant_probe(&[MartingaleSample { max_abs: 0.0, quad_variation: 0.0 }]), 0.0);
        // single Brownian mode: M = W on [0,1]
        let n = 200;
        let samples: Vec<_> = (0..2000)
            .map(|i| {
                let p = crate::noise::sample_path(crate::noise::RngStreamKey::dynamics(9, i), 1, n, 1.0 / n as f64)
                    .unwrap();
                let mut w = 0.0_f64;
                let mut max = 0.0_f64;
                for s in 0..n {
                    w += p.increment(0, s);
                    max = max.max(w.abs());
                }
                MartingaleSample { max_abs: max, quad_variation: 1.0 }
            })
            .collect();
        let r = bdg_constant_probe(&samples);
        assert!(r > 0.3 && r < 3.0, "{r}");
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(32))]
        #[test]
        fn mollified_l1_sandwich(seed in 0u64..1000, m in 1u32..=6) {
            use rand::{Rng, SeedableRng};
            let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
            let g = TorusGrid::new(1, 32).unwrap();
            let u = PeriodicField::new(g, (0..32).map(|_| rng.random_range(-1.0..1.0)).collect()).unwrap();
            let v = PeriodicField::new(g, (0..32).map(|_| rng.random_range(-1.0..1.0)).collect()).unwrap();
            let phi = mollified_l1(&u, &v, m).unwrap();
            let l1 = u.sub(&v).unwrap().lp_norm(1.0).unwrap();
            prop_assert!(phi <= l1 + 1e-15);
            prop_assert!(l1 <= phi + a_term(m - 1) + 1e-15);
        }

        #[test]
        fn exit_time_monotone_in_m(m1 in 0.0f64..1.0, m2 in 0.0f64..1.0) {
            let tr = heat_run(1.0, 300);
            let (lo, hi) = if m1 < m2 { (m1, m2) } else { (m2, m1) };
            let t = |m| first_exit_time(&tr, 1.0, 4.0, m, H1Convention::Seminorm).unwrap_or(f64::INFINITY);
            prop_assert!(t(lo) <= t(hi));
        }
    }
}
