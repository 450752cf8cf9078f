//! Time stepping for the ε-scaled quasilinear equation, its mollified variant,
//! and the driftless limit equation.
//!
//! Scaled step (IMEX, `λ` = implicit coefficient):
//!
//! ```text
//! û⁺ = (û + ε dt · 2πik·F̂ + N̂) / (1 + ε dt λ 4π²|k|²),   F = (A_eff(u) − λI)∇u − B(u)
//! ```
//!
//! with `N = √ε σ(εt, u) ΔW` evaluated at the left endpoint. The limit step is
//! `v⁺ = v + N(v)`. Both consume the same increments in the same order, so
//! runs driven by one [`NoisePath`] are pathwise coupled.

use std::f64::consts::PI;
use std::io::Write;

use num_complex::Complex64;

use crate::coefficients::{BasisTable, CoefficientSet};
use crate::error::{Error, Result};
use crate::field::{FftPlan, ModeTable, PeriodicField, TorusGrid, MAX_DIM};
use crate::heat::{positive_smoothing_table, SmoothingParam};
use crate::noise::NoisePath;

/// Magnitude beyond which a run is declared unstable.
pub const BLOWUP_THRESHOLD: f64 = 1e8;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Scheme {
    Imex,
    Explicit,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SolverConfig {
    pub grid: TorusGrid,
    /// Steps over the unit horizon; `dt = 1 / n_steps`.
    pub n_steps: usize,
    pub scheme: Scheme,
    pub dealias: bool,
    /// Snapshot stride (the final step is always recorded).
    pub record_every: usize,
}

impl SolverConfig {
    pub fn new(grid: TorusGrid, n_steps: usize) -> Self {
        Self {
            grid,
            n_steps,
            scheme: Scheme::Imex,
            dealias: true,
            record_every: n_steps.max(1),
        }
    }

    pub fn with_scheme(mut self, scheme: Scheme) -> Self {
        self.scheme = scheme;
        self
    }

    pub fn with_record_every(mut self, every: usize) -> Self {
        self.record_every = every;
        self
    }

    pub fn dt(&self) -> f64 {
        1.0 / self.n_steps as f64
    }

    /// Largest stable `dt` of the explicit scheme: `2 / (π² d ε C_A n²)`.
    pub fn explicit_dt_bound(&self, upper: f64, eps: f64) -> f64 {
        let n = self.grid.n_per_axis() as f64;
        2.0 / (PI * PI * self.grid.dim() as f64 * eps * upper * n * n)
    }

    pub fn validate(&self, set: &CoefficientSet, eps: f64) -> Result<()> {
        if self.n_steps == 0 {
            return Err(Error::Config("n_steps must be positive".into()));
        }
        if self.record_every == 0 {
            return Err(Error::Config("record_every must be positive".into()));
        }
        if set.dim != self.grid.dim() {
            return Err(Error::Config(format!(
                "coefficient set `{}` is {}-D but the grid is {}-D",
                set.name,
                set.dim,
                self.grid.dim()
            )));
        }
        if !(eps > 0.0 && eps <= 1.0) {
            return Err(Error::InvalidParameter {
                name: "eps",
                reason: format!("must lie in (0, 1] (got {eps})"),
            });
        }
        if self.scheme == Scheme::Explicit {
            let bound = self.explicit_dt_bound(set.diffusion.upper, eps);
            if self.dt() > bound {
                return Err(Error::Config(format!(
                    "explicit scheme unstable: dt = {:e} exceeds 2/(pi^2 d eps C_A n^2) = {bound:e}",
                    self.dt()
                )));
            }
        }
        Ok(())
    }
}

/// Which equation a [`Stepper`] advances.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Equation {
    /// ε-scaled equation; `r > 0` mollifies the diffusion matrix.
    Scaled { r: f64 },
    /// Driftless limit equation.
    Limit,
}

/// One-step data returned by [`Stepper::advance`].
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct StepInfo {
    /// `⟨u_j, N_j⟩`, the increment of the energy martingale.
    pub martingale_increment: f64,
}

enum Drift {
    /// No drift at all (limit equation).
    None,
    /// Constant isotropic diffusion, no flux: a diagonal multiplier.
    Linear,
    /// Full quasilinear flux.
    General,
}

/// Incremental solver state for one path.
pub struct Stepper<'a> {
    set: &'a CoefficientSet,
    grid: TorusGrid,
    eps: f64,
    sqrt_eps: f64,
    dt: f64,
    dealias: bool,
    drift: Drift,
    lambda: f64,
    plan: FftPlan,
    modes: ModeTable,
    basis: BasisTable,
    /// Sparse spectra of the basis profiles, present for state-independent noise.
    basis_hat: Option<Vec<Vec<(usize, Complex64)>>>,
    lin_mult: Vec<f64>,
    denom: Vec<f64>,
    smoothing: Option<Vec<f64>>,
    u: Vec<f64>,
    u_hat: Vec<Complex64>,
    phys_ok: bool,
    spec_ok: bool,
    noise: Vec<f64>,
    noise_hat: Vec<Complex64>,
    grad: [Vec<f64>; MAX_DIM],
    coef: Vec<Vec<f64>>,
    flux: Vec<f64>,
    work_hat: Vec<Complex64>,
    acc_hat: Vec<Complex64>,
    track_martingale: bool,
}

impl<'a> Stepper<'a> {
    pub fn new(eq: Equation, set: &'a CoefficientSet, eps: f64, cfg: &SolverConfig, f: &PeriodicField) -> Result<Self> {
        cfg.validate(set, eps)?;
        let grid = cfg.grid;
        if f.grid() != grid {
            return Err(Error::GridMismatch);
        }
        let total = grid.total_points();
        let dt = cfg.dt();
        let modes = grid.mode_table();
        let basis = set.noise.basis_table(grid);
        let mut plan = FftPlan::new(grid);

        let constant_iso = set
            .diffusion
            .constant_value()
            .filter(|_| set.diffusion.is_isotropic())
            .map(|m| m[0][0]);
        let (drift, lambda, smoothing) = match eq {
            Equation::Limit => (Drift::None, 0.0, None),
            Equation::Scaled { r } => {
                let r = SmoothingParam::new(r)?;
                match (constant_iso, set.flux.is_zero()) {
                    (Some(c), true) => (Drift::Linear, c, None),
                    _ => {
                        let lambda = set.diffusion.implicit_coefficient();
                        let needs_smoothing = !r.is_identity() && set.diffusion.constant_value().is_none();
                        let smoothing = needs_smoothing.then(|| positive_smoothing_table(grid, r.value()));
                        (Drift::General, lambda, smoothing)
                    }
                }
            }
        };
        let ed = eps * dt;
        let (lin_mult, denom): (Vec<f64>, Vec<f64>) = modes
            .k_sq
            .iter()
            .map(|&k2| {
                let l = 4.0 * PI * PI * k2;
                match (&drift, cfg.scheme) {
                    (Drift::None, _) => (1.0, 1.0),
                    (_, Scheme::Imex) => (1.0, 1.0 / (1.0 + ed * lambda * l)),
                    (Drift::Linear, Scheme::Explicit) => (1.0 - ed * lambda * l, 1.0),
                    (Drift::General, Scheme::Explicit) => (1.0, 1.0),
                }
            })
            .unzip();
        // explicit general flux carries all of A; no implicit part
        let lambda = match (&drift, cfg.scheme) {
            (Drift::General, Scheme::Explicit) => 0.0,
            _ => lambda,
        };

        let basis_hat = (set.noise.is_additive() && !set.noise.is_zero()).then(|| {
            basis
                .values
                .iter()
                .map(|row| {
                    let mut hat = vec![Complex64::default(); total];
                    plan.forward(row, &mut hat);
                    let scale = hat.iter().map(|c| c.norm()).fold(0.0, f64::max);
                    hat.iter()
                        .enumerate()
                        .filter(|(_, c)| c.norm() > 1e-13 * scale)
                        .map(|(i, c)| (i, *c))
                        .collect()
                })
                .collect()
        });

        let mut u_hat = vec![Complex64::default(); total];
        plan.forward(f.values(), &mut u_hat);
        let dim = grid.dim();
        Ok(Self {
            set,
            grid,
            eps,
            sqrt_eps: eps.sqrt(),
            dt,
            dealias: cfg.dealias,
            drift,
            lambda,
            plan,
            modes,
            basis,
            basis_hat,
            lin_mult,
            denom,
            smoothing,
            u: f.values().to_vec(),
            u_hat,
            phys_ok: true,
            spec_ok: true,
            noise: vec![0.0; total],
            noise_hat: vec![Complex64::default(); total],
            grad: [vec![0.0; total], vec![0.0; if dim > 1 { total } else { 0 }]],
            coef: vec![vec![0.0; total]; dim * dim],
            flux: vec![0.0; total],
            work_hat: vec![Complex64::default(); total],
            acc_hat: vec![Complex64::default(); total],
            track_martingale: false,
        })
    }

    pub fn track_martingale(mut self, on: bool) -> Self {
        self.track_martingale = on;
        self
    }

    pub fn grid(&self) -> TorusGrid {
        self.grid
    }

    pub fn eps(&self) -> f64 {
        self.eps
    }

    pub fn dt(&self) -> f64 {
        self.dt
    }

    pub fn set(&self) -> &CoefficientSet {
        self.set
    }

    fn ensure_phys(&mut self) {
        if !self.phys_ok {
            self.plan.inverse(&self.u_hat, &mut self.u);
            self.phys_ok = true;
        }
    }

    fn ensure_spec(&mut self) {
        if !self.spec_ok {
            self.plan.forward(&self.u, &mut self.u_hat);
            self.spec_ok = true;
        }
    }

    /// Current grid values.
    pub fn values(&mut self) -> &[f64] {
        self.ensure_phys();
        &self.u
    }

    /// Current Fourier coefficients.
    pub fn coeffs(&mut self) -> &[Complex64] {
        self.ensure_spec();
        &self.u_hat
    }

    pub fn field(&mut self) -> PeriodicField {
        PeriodicField::from_raw(self.grid, self.values().to_vec())
    }

    /// `‖u‖²_H`.
    pub fn l2_sq(&self) -> f64 {
        if self.spec_ok {
            crate::field::spectral_l2_sq(&self.u_hat)
        } else {
            self.u.iter().map(|v| v * v).sum::<f64>() / self.u.len() as f64
        }
    }

    /// `‖Du‖²_H`.
    pub fn h1_semi_sq(&mut self) -> f64 {
        self.ensure_spec();
        crate::field::spectral_seminorm_sq(&self.u_hat, &self.modes.k_sq)
    }

    /// `Σ_k ‖σ(εt, u)ē_k‖²_H` at the current state.
    pub fn hs_norm_sq(&mut self, t: f64) -> f64 {
        self.ensure_phys();
        self.set.noise.hs_norm_sq_with(&self.basis, self.eps * t, &self.u)
    }

    /// `(⟨u, σ_k(εt,u)e_k⟩)_k` at the current state.
    pub fn mode_projections(&mut self, t: f64, out: &mut [f64]) {
        self.ensure_phys();
        self.set.noise.mode_projections(&self.basis, self.eps * t, &self.u, out);
    }

    /// Noise increment `N = √ε σ(εt, u) ΔW`; returns whether the spectral copy is filled
    /// (otherwise only the grid copy is).
    fn build_noise(&mut self, t: f64, dw: &[f64], need_spectral: bool) -> NoiseForm {
        let noise = &self.set.noise;
        if noise.is_zero() {
            return NoiseForm::Zero;
        }
        let amp = self.sqrt_eps * noise.time_factor(self.eps * t);
        if let Some(hats) = &self.basis_hat {
            let c = amp * noise.shape.eval(0.0);
            self.noise_hat.iter_mut().for_each(|z| *z = Complex64::default());
            for ((w, q), hat) in dw.iter().zip(&noise.amplitudes).zip(hats) {
                let s = c * w * q;
                if s != 0.0 {
                    for &(i, e) in hat {
                        self.noise_hat[i] += e * s;
                    }
                }
            }
            return NoiseForm::Spectral;
        }
        self.ensure_phys();
        noise.combine_profiles(&self.basis, dw, &mut self.noise);
        for (n, &y) in self.noise.iter_mut().zip(&self.u) {
            *n *= amp * noise.shape.eval(y);
        }
        if need_spectral {
            self.plan.forward(&self.noise, &mut self.noise_hat);
            NoiseForm::Both
        } else {
            NoiseForm::Physical
        }
    }

    fn martingale_increment(&self, form: NoiseForm) -> f64 {
        match form {
            NoiseForm::Zero => 0.0,
            NoiseForm::Spectral | NoiseForm::Both if self.spec_ok => self
                .u_hat
                .iter()
                .zip(&self.noise_hat)
                .map(|(a, b)| (a * b.conj()).re)
                .sum(),
            NoiseForm::Spectral => {
                // spectral noise but stale coefficients cannot happen: the state is spectral
                unreachable!("spectral noise requires spectral state")
            }
            _ => crate::field::dot(&self.u, &self.noise) / self.u.len() as f64,
        }
    }

    /// Advance one step of size `dt` from time `t = step·dt`.
    pub fn advance(&mut self, step: usize, dw: &[f64]) -> Result<StepInfo> {
        let t = step as f64 * self.dt;
        let mut info = StepInfo::default();
        match self.drift {
            Drift::None => {
                let spectral_state = self.basis_hat.is_some() && self.spec_ok;
                let form = self.build_noise(t, dw, false);
                if self.track_martingale {
                    if !matches!(form, NoiseForm::Spectral) {
                        self.ensure_phys();
                    }
                    info.martingale_increment = self.martingale_increment(form);
                }
                match form {
                    NoiseForm::Zero => {}
                    NoiseForm::Spectral if spectral_state => {
                        for (u, n) in self.u_hat.iter_mut().zip(&self.noise_hat) {
                            *u += n;
                        }
                        self.phys_ok = false;
                    }
                    NoiseForm::Spectral => {
                        // grid state: add the noise on the grid
                        self.plan.inverse(&self.noise_hat, &mut self.noise);
                        for (u, n) in self.u.iter_mut().zip(&self.noise) {
                            *u += n;
                        }
                        self.spec_ok = false;
                    }
                    NoiseForm::Physical | NoiseForm::Both => {
                        for (u, n) in self.u.iter_mut().zip(&self.noise) {
                            *u += n;
                        }
                        self.spec_ok = false;
                    }
                }
            }
            Drift::Linear | Drift::General => {
                let form = self.build_noise(t, dw, true);
                self.ensure_spec();
                if self.track_martingale {
                    info.martingale_increment = self.martingale_increment(form);
                }
                let general = matches!(self.drift, Drift::General);
                if general {
                    self.flux_divergence();
                }
                let ed = self.eps * self.dt;
                let has_noise = !matches!(form, NoiseForm::Zero);
                for i in 0..self.u_hat.len() {
                    let mut z = self.u_hat[i] * self.lin_mult[i];
                    if general {
                        z += self.acc_hat[i] * ed;
                    }
                    if has_noise {
                        z += self.noise_hat[i];
                    }
                    self.u_hat[i] = z * self.denom[i];
                }
                self.phys_ok = false;
                if general || !self.set.noise.is_additive() {
                    self.ensure_phys();
                }
            }
        }
        self.check_blowup(step)?;
        Ok(info)
    }

    fn check_blowup(&mut self, step: usize) -> Result<()> {
        if !self.phys_ok {
            let bound: f64 = self.u_hat.iter().map(|c| c.norm()).sum();
            if bound <= BLOWUP_THRESHOLD {
                return Ok(());
            }
            self.ensure_phys();
        }
        let mut max_abs = 0.0_f64;
        for &v in &self.u {
            if !v.is_finite() {
                return Err(Error::BlowUp { step, max_abs: f64::INFINITY });
            }
            max_abs = max_abs.max(v.abs());
        }
        if max_abs > BLOWUP_THRESHOLD {
            return Err(Error::BlowUp { step, max_abs });
        }
        Ok(())
    }

    /// `acc_hat = 2πik·F̂` with `F = (A_eff(u) − λI)∇u − B(u)`, dealiased.
    fn flux_divergence(&mut self) {
        self.ensure_phys();
        self.ensure_spec();
        let dim = self.grid.dim();
        let set = self.set;
        for a in 0..dim {
            let deriv = &self.modes.deriv[a];
            self.plan.inverse_scaled(
                &self.u_hat,
                |i| Complex64::new(0.0, 2.0 * PI * deriv[i]),
                &mut self.grad[a],
            );
        }
        // diffusion entries on the grid
        let isotropic = set.diffusion.is_isotropic();
        match set.diffusion.constant_value() {
            Some(m) => {
                for i in 0..dim {
                    for j in 0..dim {
                        self.coef[i * dim + j].fill(m[i][j]);
                    }
                }
            }
            None => {
                if isotropic {
                    for (c, &y) in self.coef[0].iter_mut().zip(&self.u) {
                        *c = set.diffusion.eval(y)[0][0];
                    }
                } else {
                    for (x, &y) in self.u.iter().enumerate() {
                        let m = set.diffusion.eval(y);
                        for i in 0..dim {
                            for j in 0..dim {
                                self.coef[i * dim + j][x] = m[i][j];
                            }
                        }
                    }
                }
                if let Some(table) = &self.smoothing {
                    let entries = if isotropic { 1 } else { dim * dim };
                    for e in 0..entries {
                        self.plan.forward(&self.coef[e], &mut self.work_hat);
                        self.plan
                            .inverse_scaled(&self.work_hat, |i| Complex64::new(table[i], 0.0), &mut self.coef[e]);
                    }
                }
            }
        }
        self.acc_hat.iter_mut().for_each(|z| *z = Complex64::default());
        let flux_zero = set.flux.is_zero();
        for a in 0..dim {
            for x in 0..self.u.len() {
                let mut s = 0.0;
                for b in 0..dim {
                    let entry = if isotropic && set.diffusion.constant_value().is_none() {
                        if a == b {
                            self.coef[0][x]
                        } else {
                            0.0
                        }
                    } else {
                        self.coef[a * dim + b][x]
                    };
                    let shifted = if a == b { entry - self.lambda } else { entry };
                    s += shifted * self.grad[b][x];
                }
                if !flux_zero {
                    s -= set.flux.eval(self.u[x])[a];
                }
                self.flux[x] = s;
            }
            self.plan.forward(&self.flux, &mut self.work_hat);
            let deriv = &self.modes.deriv[a];
            for i in 0..self.work_hat.len() {
                if self.dealias && !self.modes.keep[i] {
                    continue;
                }
                self.acc_hat[i] += self.work_hat[i] * Complex64::new(0.0, 2.0 * PI * deriv[i]);
            }
        }
    }
}

#[derive(Debug, Clone, Copy)]
enum NoiseForm {
    Zero,
    Spectral,
    Physical,
    Both,
}

/// `‖a − b‖²_H` between two steppers on the same grid.
pub fn sq_distance(a: &mut Stepper<'_>, b: &mut Stepper<'_>) -> f64 {
    if a.spec_ok && b.spec_ok {
        a.u_hat.iter().zip(&b.u_hat).map(|(x, y)| (x - y).norm_sqr()).sum()
    } else {
        a.ensure_phys();
        b.ensure_phys();
        a.u.iter().zip(&b.u).map(|(x, y)| (x - y).powi(2)).sum::<f64>() / a.u.len() as f64
    }
}

/// `‖a − b‖_{L¹}` between two steppers.
pub fn l1_distance(a: &mut Stepper<'_>, b: &mut Stepper<'_>) -> f64 {
    a.ensure_phys();
    b.ensure_phys();
    a.u.iter().zip(&b.u).map(|(x, y)| (x - y).abs()).sum::<f64>() / a.u.len() as f64
}

/// Per-step diagnostics of a trajectory.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StepDiagnostics {
    pub t: f64,
    pub l2_norm: f64,
    pub h1_seminorm: f64,
    /// `Σ_k ‖σ(εt,u)ē_k‖²_H` at this state.
    pub hs_norm_sq: f64,
    /// Running `Σ_j ⟨u_j, N_j⟩`.
    pub martingale: f64,
    /// Running `ε Σ_j Σ_k ⟨u_j, σ_k e_k⟩² dt`.
    pub quad_variation: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory {
    pub grid: TorusGrid,
    pub eps: f64,
    /// Mollification time (`Some(0.0)` for the unmollified scaled equation, `None` for the limit).
    pub r: Option<f64>,
    pub dt: f64,
    pub record_every: usize,
    pub times: Vec<f64>,
    pub snapshots: Vec<PeriodicField>,
    /// One entry per step, including `t = 0`.
    pub diagnostics: Vec<StepDiagnostics>,
}

impl Trajectory {
    pub fn initial(&self) -> &PeriodicField {
        &self.snapshots[0]
    }

    pub fn last(&self) -> &PeriodicField {
        self.snapshots.last().expect("nonempty")
    }

    pub fn n_steps(&self) -> usize {
        self.diagnostics.len() - 1
    }

    /// Snapshots as `(t, grid_index, value)` rows.
    pub fn write_snapshots_csv<W: Write>(&self, mut w: W) -> std::io::Result<()> {
        writeln!(w, "t,grid_index,value")?;
        for (t, f) in self.times.iter().zip(&self.snapshots) {
            for (i, v) in f.values().iter().enumerate() {
                writeln!(w, "{t},{i},{v}")?;
            }
        }
        Ok(())
    }

    /// Diagnostics as `(t, l2_norm, h1_seminorm, hs_norm)` rows.
    pub fn write_diagnostics_csv<W: Write>(&self, mut w: W) -> std::io::Result<()> {
        writeln!(w, "t,l2_norm,h1_seminorm,hs_norm")?;
        for d in &self.diagnostics {
            writeln!(w, "{},{},{},{}", d.t, d.l2_norm, d.h1_seminorm, d.hs_norm_sq.sqrt())?;
        }
        Ok(())
    }
}

fn check_noise(noise: &NoisePath, cfg: &SolverConfig, set: &CoefficientSet) -> Result<()> {
    if noise.n_steps() != cfg.n_steps {
        return Err(Error::NoiseMismatch {
            expected: cfg.n_steps,
            got: noise.n_steps(),
        });
    }
    if noise.n_modes() != set.noise.n_modes() {
        return Err(Error::InvalidParameter {
            name: "noise",
            reason: format!("path has {} modes, coefficient set has {}", noise.n_modes(), set.noise.n_modes()),
        });
    }
    Ok(())
}

fn run(mut st: Stepper<'_>, noise: &NoisePath, cfg: &SolverConfig, r: Option<f64>) -> Result<Trajectory> {
    let k = st.set.noise.n_modes();
    let mut proj = vec![0.0; k];
    let mut diagnostics = Vec::with_capacity(cfg.n_steps + 1);
    let mut times = vec![0.0];
    let mut snapshots = vec![st.field()];
    let (mut mart, mut qv) = (0.0, 0.0);
    let diag = |st: &mut Stepper<'_>, t: f64, mart: f64, qv: f64| StepDiagnostics {
        t,
        l2_norm: st.l2_sq().sqrt(),
        h1_seminorm: st.h1_semi_sq().sqrt(),
        hs_norm_sq: st.hs_norm_sq(t),
        martingale: mart,
        quad_variation: qv,
    };
    diagnostics.push(diag(&mut st, 0.0, 0.0, 0.0));
    let noisy = !st.set.noise.is_zero();
    for step in 0..cfg.n_steps {
        let t = step as f64 * st.dt;
        if noisy {
            st.mode_projections(t, &mut proj);
            qv += st.eps * st.dt * proj.iter().map(|p| p * p).sum::<f64>();
        }
        let info = st.advance(step, noise.step(step))?;
        mart += info.martingale_increment;
        let t1 = (step + 1) as f64 * st.dt;
        diagnostics.push(diag(&mut st, t1, mart, qv));
        if (step + 1) % cfg.record_every == 0 || step + 1 == cfg.n_steps {
            times.push(t1);
            snapshots.push(st.field());
        }
    }
    Ok(Trajectory {
        grid: cfg.grid,
        eps: st.eps,
        r,
        dt: st.dt,
        record_every: cfg.record_every,
        times,
        snapshots,
        diagnostics,
    })
}

/// Solve the ε-scaled equation (mollified when `r > 0`) on `[0, 1]`.
pub fn solve_scaled(
    f: &PeriodicField,
    eps: f64,
    set: &CoefficientSet,
    noise: &NoisePath,
    cfg: &SolverConfig,
    r: f64,
) -> Result<Trajectory> {
    check_noise(noise, cfg, set)?;
    let st = Stepper::new(Equation::Scaled { r }, set, eps, cfg, f)?.track_martingale(true);
    run(st, noise, cfg, Some(r))
}

/// Solve the driftless limit equation on `[0, 1]`.
pub fn solve_limit(
    f: &PeriodicField,
    eps: f64,
    set: &CoefficientSet,
    noise: &NoisePath,
    cfg: &SolverConfig,
) -> Result<Trajectory> {
    check_noise(noise, cfg, set)?;
    let st = Stepper::new(Equation::Limit, set, eps, cfg, f)?.track_martingale(true);
    run(st, noise, cfg, None)
}

/// One step of the scaled equation from an arbitrary state (convenience wrapper).
#[allow(clippy::too_many_arguments)]
pub fn step_quasilinear(
    u: &PeriodicField,
    t: f64,
    dw: &[f64],
    set: &CoefficientSet,
    eps: f64,
    r: f64,
    cfg: &SolverConfig,
) -> Result<PeriodicField> {
    let mut st = Stepper::new(Equation::Scaled { r }, set, eps, cfg, u)?;
    let step = (t / cfg.dt()).round() as usize;
    st.advance(step, dw)?;
    Ok(st.field())
}

/// Residual of the weak formulation against a test function `φ`, using the
/// solver's own left-point time sums and grid quadrature.
pub fn weak_residual(
    traj: &Trajectory,
    phi: &PeriodicField,
    set: &CoefficientSet,
    noise: &NoisePath,
    eps: f64,
    r: f64,
) -> Result<f64> {
    if traj.record_every != 1 {
        return Err(Error::RecordEveryRequired);
    }
    if phi.grid() != traj.grid {
        return Err(Error::GridMismatch);
    }
    let n = traj.n_steps();
    if noise.n_steps() != n {
        return Err(Error::NoiseMismatch { expected: n, got: noise.n_steps() });
    }
    let dt = traj.dt;
    let grid = traj.grid;
    let dim = grid.dim();
    let grad_phi = phi.gradient();
    let sqrt_eps = eps.sqrt();
    let mut drift = 0.0;
    let mut stoch = 0.0;
    for j in 0..n {
        let u = &traj.snapshots[j];
        let t = j as f64 * dt;
        // flux term
        if !set.flux.is_zero() {
            let mut s = 0.0;
            for (x, &y) in u.values().iter().enumerate() {
                let b = set.flux.eval(y);
                for a in 0..dim {
                    s += b[a] * grad_phi.component(a).values()[x];
                }
            }
            drift -= eps * dt * s / grid.total_points() as f64;
        }
        // diffusion term
        let a_eff = crate::heat::mollify_diffusion(&set.diffusion, u, r)?;
        let grad_u = u.gradient();
        let mut s = 0.0;
        for x in 0..grid.total_points() {
            let m = a_eff.at(x);
            for a in 0..dim {
                for b in 0..dim {
                    s += m[a][b] * grad_u.component(b).values()[x] * grad_phi.component(a).values()[x];
                }
            }
        }
        drift += eps * dt * s / grid.total_points() as f64;
        // stochastic term
        if !set.noise.is_zero() {
            let g = set.noise.apply(eps * t, u, noise.step(j))?;
            stoch += sqrt_eps * g.inner(phi)?;
        }
    }
    let change = traj.last().inner(phi)? - traj.initial().inner(phi)?;
    Ok((change + drift - stoch).abs())
}
