//! Heat semigroup `P_r` on the torus and the mollified diffusion matrix `A_r(u) = P_r(A(u))`.

use std::f64::consts::PI;

use num_complex::Complex64;

use crate::coefficients::{DiffusionKind, DiffusionSpec};
use crate::error::{Error, Result};
use crate::field::{sym_eigenvalues, with_plan, MatrixField, PeriodicField, TorusGrid};

/// Slack allowed in the discrete ellipticity check of `A_r`.
pub const ELLIPTICITY_SLACK: f64 = 1e-10;

/// Heat-kernel time `r`. Zero is accepted as the identity.
#[derive(Debug, Clone, Copy, PartialEq, PartialOrd)]
pub struct SmoothingParam(f64);

impl SmoothingParam {
    pub fn new(r: f64) -> Result<Self> {
        if !(r >= 0.0) || !r.is_finite() {
            return Err(Error::NegativeHeatTime(r));
        }
        Ok(Self(r))
    }

    pub fn value(self) -> f64 {
        self.0
    }

    pub fn is_identity(self) -> bool {
        self.0 == 0.0
    }
}

/// Multiplier `e^{−4π²|k|² r}`.
#[inline]
pub fn heat_multiplier(k_sq: f64, r: f64) -> f64 {
    (-4.0 * PI * PI * k_sq * r).exp()
}

/// `P_r u` as the exact Fourier multiplier on the grid modes.
pub fn apply_heat(field: &PeriodicField, r: f64) -> Result<PeriodicField> {
    let r = SmoothingParam::new(r)?;
    if r.is_identity() {
        return Ok(field.clone());
    }
    let grid = field.grid();
    let spec = field.to_spectral();
    let table = grid.mode_table();
    let mut out = vec![0.0; grid.total_points()];
    with_plan(grid, |p| {
        p.inverse_scaled(
            &spec.coeffs,
            |i| Complex64::new(heat_multiplier(table.k_sq[i], r.value()), 0.0),
            &mut out,
        )
    });
    PeriodicField::new(grid, out)
}

/// `C_r = (Σ_k e^{−8π²|k|² r})^{1/2}` over the grid modes.
pub fn smoothing_constant(grid: TorusGrid, r: f64) -> f64 {
    grid.mode_table()
        .k_sq
        .iter()
        .map(|&k2| heat_multiplier(k2, r).powi(2))
        .sum::<f64>()
        .sqrt()
}

/// `(‖P_r g‖_{L∞}, C_r ‖g‖_H)`; the first never exceeds the second.
pub fn smoothing_linf_bound_check(field: &PeriodicField, r: f64) -> Result<(f64, f64)> {
    if !(r > 0.0) {
        return Err(Error::NegativeHeatTime(r));
    }
    let lhs = apply_heat(field, r)?.lp_norm(f64::INFINITY)?;
    let rhs = smoothing_constant(field.grid(), r) * field.l2_norm();
    Ok((lhs, rhs))
}

/// Per-axis periodised heat multiplier `Σ_j e^{−4π²(k+jn)² r}`, normalised to 1 at `k = 0`.
///
/// Its discrete kernel is the heat kernel sampled on the grid, hence pointwise
/// positive, so the smoothing is a convex average of grid values. For `r`
/// well above `1/(4π²n²)·ln(1/eps)` it agrees with [`heat_multiplier`] to
/// machine precision.
pub fn periodized_multiplier(n: usize, k: i64, r: f64) -> f64 {
    let sum = |k: i64| -> f64 {
        let mut s = 0.0;
        let nn = n as i64;
        // start from the image closest to the origin and walk outwards
        let base = k - nn * ((k as f64 / nn as f64).round() as i64);
        for dir in [1i64, -1] {
            let mut j = if dir == 1 { 0 } else { -1 };
            loop {
                let w = (base + j * nn) as f64;
                let term = (-4.0 * PI * PI * w * w * r).exp();
                s += term;
                if term < 1e-300 || j.abs() > 1_000_000 {
                    break;
                }
                j += dir;
            }
        }
        s
    };
    sum(k) / sum(0)
}

/// Multiplier table of the positive smoothing for every grid mode (product over axes).
pub fn positive_smoothing_table(grid: TorusGrid, r: f64) -> Vec<f64> {
    let n = grid.n_per_axis();
    let per_axis: Vec<f64> = (0..n).map(|i| periodized_multiplier(n, grid.wave_number(i), r)).collect();
    (0..grid.total_points())
        .map(|idx| {
            let [i, j] = grid.axis_indices(idx);
            if grid.dim() == 1 {
                per_axis[i]
            } else {
                per_axis[i] * per_axis[j]
            }
        })
        .collect()
}

/// Apply a multiplier table to raw grid values in place.
pub(crate) fn smooth_in_place(grid: TorusGrid, table: &[f64], values: &mut [f64]) {
    let mut spec = vec![Complex64::default(); values.len()];
    with_plan(grid, |p| {
        p.forward(values, &mut spec);
        p.inverse_scaled(&spec, |i| Complex64::new(table[i], 0.0), values);
    });
}

/// `A_r(u)`: each entry of `A(u(·))` smoothed by the positive heat kernel.
pub fn mollify_diffusion(diffusion: &DiffusionSpec, u: &PeriodicField, r: f64) -> Result<MatrixField> {
    let r = SmoothingParam::new(r)?;
    let grid = u.grid();
    let dim = grid.dim();
    let table = (!r.is_identity()).then(|| positive_smoothing_table(grid, r.value()));
    let mut entries = Vec::with_capacity(dim * dim);
    let constant = diffusion.constant_value();
    for i in 0..dim {
        for j in 0..dim {
            let mut v: Vec<f64> = match constant {
                Some(m) => vec![m[i][j]; grid.total_points()],
                None => u.values().iter().map(|&y| diffusion.eval(y)[i][j]).collect(),
            };
            if let (Some(t), None) = (&table, constant) {
                let isotropic_offdiag = i != j && matches!(diffusion.kind, DiffusionKind::Isotropic(_));
                if !isotropic_offdiag {
                    smooth_in_place(grid, t, &mut v);
                }
            }
            entries.push(PeriodicField::from_raw(grid, v));
        }
    }
    let m = MatrixField::new(grid, entries)?;
    check_ellipticity(&m, diffusion.rho, diffusion.upper)?;
    Ok(m)
}

/// Verify `ρ − slack ≤ λ(x) ≤ C + slack` at every grid point.
pub fn check_ellipticity(m: &MatrixField, rho: f64, upper: f64) -> Result<()> {
    let grid = m.grid();
    for index in 0..grid.total_points() {
        let (lo, hi) = sym_eigenvalues(&m.at(index), grid.dim());
        for value in [lo, hi] {
            if value < rho - ELLIPTICITY_SLACK || value > upper + ELLIPTICITY_SLACK {
                return Err(Error::EllipticityViolation {
                    index,
                    value,
                    lower: rho,
                    upper,
                });
            }
        }
    }
    Ok(())
}
