//! Discrete rate function of the driftless skeleton `ġ = σ(t, g) ḣ`.
//!
//! On each control interval the minimum-norm `ḣᵢ` solving
//! `Σ_k ḣᵢₖ σ_k(tᵢ, gᵢ) e_k ≈ (gᵢ₊₁ − gᵢ)/Δt` is found from the `K × K` Gram
//! matrix. With no drift the intervals decouple, so interval-wise minima give
//! the global minimum over piecewise-constant controls.

use std::io::Write;

use nalgebra::{DMatrix, DVector, SymmetricEigen};

use crate::coefficients::{BasisTable, NoiseSpec};
use crate::error::{Error, Result};
use crate::field::{dot, PeriodicField, TorusGrid};
use crate::solver::BLOWUP_THRESHOLD;

/// Relative eigenvalue floor of the Gram pseudo-inverse.
pub const EIGEN_FLOOR: f64 = 1e-12;
/// Default relative feasibility tolerance.
pub const DEFAULT_TOL: f64 = 1e-6;

/// A discretized path on a uniform grid of `[0, 1]`.
#[derive(Debug, Clone, PartialEq)]
pub struct PathCandidate {
    pub times: Vec<f64>,
    pub g_values: Vec<PeriodicField>,
}

impl PathCandidate {
    pub fn new(g_values: Vec<PeriodicField>) -> Result<Self> {
        if g_values.len() < 2 {
            return Err(Error::InvalidParameter {
                name: "n_ctrl",
                reason: "a path needs at least one interval".into(),
            });
        }
        let grid = g_values[0].grid();
        if g_values.iter().any(|g| g.grid() != grid) {
            return Err(Error::GridMismatch);
        }
        let n = g_values.len() - 1;
        Ok(Self {
            times: (0..=n).map(|i| i as f64 / n as f64).collect(),
            g_values,
        })
    }

    /// Sample `t ↦ g(t)` at `n_ctrl + 1` nodes.
    pub fn from_fn(n_ctrl: usize, g: impl Fn(f64) -> PeriodicField) -> Result<Self> {
        Self::new((0..=n_ctrl).map(|i| g(i as f64 / n_ctrl.max(1) as f64)).collect())
    }

    pub fn f(&self) -> &PeriodicField {
        &self.g_values[0]
    }

    pub fn n_ctrl(&self) -> usize {
        self.g_values.len() - 1
    }

    pub fn dt(&self) -> f64 {
        1.0 / self.n_ctrl() as f64
    }

    pub fn grid(&self) -> TorusGrid {
        self.g_values[0].grid()
    }
}

/// Piecewise-constant control with its action.
#[derive(Debug, Clone, PartialEq)]
pub struct ControlPath {
    /// `hdot[i][k]` on interval `i`.
    pub hdot: Vec<Vec<f64>>,
    pub dt: f64,
    pub action: f64,
}

impl ControlPath {
    pub fn new(hdot: Vec<Vec<f64>>, dt: f64) -> Result<Self> {
        let action = action_of_control(&hdot, dt)?;
        Ok(Self { hdot, dt, action })
    }
}

/// `½ Σᵢ Σ_k ḣᵢₖ² Δt`.
pub fn action_of_control(hdot: &[Vec<f64>], dt: f64) -> Result<f64> {
    if hdot.iter().flatten().any(|h| !h.is_finite()) {
        return Err(Error::InvalidParameter {
            name: "hdot",
            reason: "control has non-finite entries".into(),
        });
    }
    Ok(0.5 * dt * hdot.iter().map(|h| h.iter().map(|x| x * x).sum::<f64>()).sum::<f64>())
}

#[derive(Debug, Clone, PartialEq)]
pub struct RateEvaluation {
    pub control: ControlPath,
    /// Largest relative L² mismatch over intervals.
    pub residual: f64,
    /// `I(g)`: the action if feasible, `+∞` otherwise.
    pub rate: f64,
    pub interval_actions: Vec<f64>,
    pub interval_residuals: Vec<f64>,
}

impl RateEvaluation {
    pub fn feasible(&self) -> bool {
        self.rate.is_finite()
    }

    /// `(interval, t, action, residual)` rows preceded by the total.
    pub fn write_csv<W: Write>(&self, mut w: W) -> std::io::Result<()> {
        writeln!(w, "# rate={},residual={}", self.rate, self.residual)?;
        writeln!(w, "interval,t,action,residual")?;
        for (i, (a, r)) in self.interval_actions.iter().zip(&self.interval_residuals).enumerate() {
            writeln!(w, "{i},{},{a},{r}", i as f64 * self.control.dt)?;
        }
        Ok(())
    }
}

/// Columns `σ_k(t, g(x)) e_k(x)` of the interval's linear map.
fn columns(spec: &NoiseSpec, table: &BasisTable, t: f64, g: &[f64]) -> Vec<Vec<f64>> {
    let tau = spec.time_factor(t);
    (0..spec.n_modes())
        .map(|k| {
            g.iter()
                .zip(&table.values[k])
                .map(|(&y, &e)| spec.amplitudes[k] * tau * spec.shape.eval(y) * e)
                .collect()
        })
        .collect()
}

/// Minimum-norm `h` with `Σ_k h_k cols_k ≈ target` in the grid inner product.
fn min_norm_solve(cols: &[Vec<f64>], target: &[f64]) -> Vec<f64> {
    let k = cols.len();
    let n = target.len() as f64;
    let gram = DMatrix::from_fn(k, k, |i, j| dot(&cols[i], &cols[j]) / n);
    let rhs = DVector::from_fn(k, |i, _| dot(&cols[i], target) / n);
    let eig = SymmetricEigen::new(gram);
    let top = eig.eigenvalues.iter().cloned().fold(0.0, f64::max);
    let mut h = DVector::zeros(k);
    if top > 0.0 {
        for (i, &lam) in eig.eigenvalues.iter().enumerate() {
            if lam > EIGEN_FLOOR * top {
                let v = eig.eigenvectors.column(i);
                h += v * (v.dot(&rhs) / lam);
            }
        }
    }
    h.iter().copied().collect()
}

/// Recover the minimum-norm control of `g` and evaluate `I(g)`.
pub fn min_norm_control(g: &PathCandidate, spec: &NoiseSpec, tol: f64) -> Result<RateEvaluation> {
    if !(tol >= 0.0) {
        return Err(Error::InvalidParameter {
            name: "tol",
            reason: format!("must be nonnegative (got {tol})"),
        });
    }
    let dt = g.dt();
    let table = spec.basis_table(g.grid());
    let mut hdot = Vec::with_capacity(g.n_ctrl());
    let mut residuals = Vec::with_capacity(g.n_ctrl());
    for i in 0..g.n_ctrl() {
        let (a, b) = (g.g_values[i].values(), g.g_values[i + 1].values());
        let target: Vec<f64> = a.iter().zip(b).map(|(x, y)| (y - x) / dt).collect();
        let cols = columns(spec, &table, g.times[i], a);
        let h = if spec.is_zero() { vec![0.0; spec.n_modes()] } else { min_norm_solve(&cols, &target) };
        let mut mismatch = target.clone();
        for (hk, col) in h.iter().zip(&cols) {
            for (m, c) in mismatch.iter_mut().zip(col) {
                *m -= hk * c;
            }
        }
        let tn = dot(&target, &target).sqrt();
        let mn = dot(&mismatch, &mismatch).sqrt();
        residuals.push(if tn > 0.0 { mn / tn } else { mn });
        hdot.push(h);
    }
    let interval_actions: Vec<f64> = hdot
        .iter()
        .map(|h| 0.5 * dt * h.iter().map(|x| x * x).sum::<f64>())
        .collect();
    let control = ControlPath::new(hdot, dt)?;
    let residual = residuals.iter().cloned().fold(0.0, f64::max);
    let rate = if residual <= tol { control.action } else { f64::INFINITY };
    Ok(RateEvaluation {
        control,
        residual,
        rate,
        interval_actions,
        interval_residuals: residuals,
    })
}

/// Explicit Euler for `ġ = Σ_k ḣ_k σ_k(t, g) e_k` with piecewise-constant `ḣ`.
pub fn forward_skeleton(f: &PeriodicField, hdot: &[Vec<f64>], spec: &NoiseSpec, n_ctrl: usize) -> Result<PathCandidate> {
    if hdot.len() != n_ctrl || n_ctrl == 0 {
        return Err(Error::InvalidParameter {
            name: "n_ctrl",
            reason: format!("control has {} intervals, expected {n_ctrl}", hdot.len()),
        });
    }
    if let Some(h) = hdot.iter().find(|h| h.len() != spec.n_modes()) {
        return Err(Error::InvalidParameter {
            name: "hdot",
            reason: format!("control has {} modes, noise has {}", h.len(), spec.n_modes()),
        });
    }
    action_of_control(hdot, 1.0)?;
    let dt = 1.0 / n_ctrl as f64;
    let table = spec.basis_table(f.grid());
    let mut g = vec![f.clone()];
    let mut cur = f.values().to_vec();
    for (i, h) in hdot.iter().enumerate() {
        let cols = columns(spec, &table, i as f64 * dt, &cur);
        for (hk, col) in h.iter().zip(&cols) {
            for (u, c) in cur.iter_mut().zip(col) {
                *u += dt * hk * c;
            }
        }
        let max_abs = cur.iter().fold(0.0_f64, |m, v| m.max(v.abs()));
        if !(max_abs <= BLOWUP_THRESHOLD) {
            return Err(Error::BlowUp { step: i, max_abs });
        }
        g.push(PeriodicField::from_raw(f.grid(), cur.clone()));
    }
    PathCandidate::new(g)
}
