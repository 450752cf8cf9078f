//! Periodic fields on the unit torus `[0,1]^d`, `d ∈ {1, 2}`.
//!
//! Values live on a uniform collocation grid with `n` points per axis, stored
//! row-major (axis 0 slowest). The spectral view uses the normalised discrete
//! Fourier transform `ĉ_k = N⁻¹ Σ_j u_j e^{-2πi k·x_j}`, so the zero mode is the
//! mean and Parseval reads `N⁻¹ Σ_j u_j² = Σ_k |ĉ_k|²`.
//!
//! Derivatives are spectral (multiplier `2πik` per axis). The Nyquist wave
//! number has a vanishing derivative on the grid and is dropped by
//! [`PeriodicField::gradient`]; norms treat it with its full magnitude `n/2`.

use std::cell::RefCell;
use std::collections::HashMap;
use std::f64::consts::PI;
use std::sync::Arc;

use num_complex::Complex64;
use rustfft::{Fft, FftPlanner};

use crate::error::{Error, Result};

pub const MAX_DIM: usize = 2;

/// 2×2 matrix used for diffusion coefficients; only the leading `dim×dim`
/// block is meaningful.
pub type Mat2 = [[f64; MAX_DIM]; MAX_DIM];

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct TorusGrid {
    dim: usize,
    n: usize,
}

impl TorusGrid {
    pub fn new(dim: usize, n_per_axis: usize) -> Result<Self> {
        if !(1..=MAX_DIM).contains(&dim) {
            return Err(Error::InvalidGrid(format!("dimension {dim} not in {{1, 2}}")));
        }
        if n_per_axis < 8 || !n_per_axis.is_multiple_of(2) {
            return Err(Error::InvalidGrid(format!(
                "n_per_axis must be even and >= 8 (got {n_per_axis})"
            )));
        }
        Ok(Self { dim, n: n_per_axis })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn n_per_axis(&self) -> usize {
        self.n
    }

    pub fn total_points(&self) -> usize {
        self.n.pow(self.dim as u32)
    }

    pub fn spacing(&self) -> f64 {
        1.0 / self.n as f64
    }

    /// Per-axis grid indices of a flat index.
    pub fn axis_indices(&self, index: usize) -> [usize; MAX_DIM] {
        match self.dim {
            1 => [index, 0],
            _ => [index / self.n, index % self.n],
        }
    }

    pub fn coords(&self, index: usize) -> [f64; MAX_DIM] {
        let [i, j] = self.axis_indices(index);
        let h = self.spacing();
        if self.dim == 1 {
            [i as f64 * h, 0.0]
        } else {
            [i as f64 * h, j as f64 * h]
        }
    }

    /// Signed wave number of an axis index in FFT order; the Nyquist index maps to `-n/2`.
    pub fn wave_number(&self, axis_index: usize) -> i64 {
        let n = self.n as i64;
        let i = axis_index as i64;
        if i < n / 2 {
            i
        } else {
            i - n
        }
    }

    pub fn wave_vector(&self, index: usize) -> [i64; MAX_DIM] {
        let [i, j] = self.axis_indices(index);
        if self.dim == 1 {
            [self.wave_number(i), 0]
        } else {
            [self.wave_number(i), self.wave_number(j)]
        }
    }

    /// Flat index of a wave vector, if representable on this grid.
    pub fn index_of_wave(&self, k: [i64; MAX_DIM]) -> Option<usize> {
        let n = self.n as i64;
        let wrap = |w: i64| -> Option<usize> {
            if w < -n / 2 || w >= n / 2 {
                None
            } else {
                Some(w.rem_euclid(n) as usize)
            }
        };
        match self.dim {
            1 => {
                if k[1] != 0 {
                    return None;
                }
                wrap(k[0])
            }
            _ => Some(wrap(k[0])? * self.n + wrap(k[1])?),
        }
    }

    fn is_nyquist(&self, axis_index: usize) -> bool {
        axis_index == self.n / 2
    }

    /// Sample a function of position on the grid.
    pub fn sample(&self, f: impl Fn([f64; MAX_DIM]) -> f64) -> PeriodicField {
        let values = (0..self.total_points()).map(|i| f(self.coords(i))).collect();
        PeriodicField { grid: *self, values }
    }

    pub fn constant(&self, c: f64) -> PeriodicField {
        PeriodicField {
            grid: *self,
            values: vec![c; self.total_points()],
        }
    }

    pub fn zeros(&self) -> PeriodicField {
        self.constant(0.0)
    }

    /// Precomputed wave-number tables for spectral loops.
    pub fn mode_table(&self) -> ModeTable {
        ModeTable::new(*self)
    }
}

/// Wave-number tables in FFT order.
#[derive(Debug, Clone)]
pub struct ModeTable {
    pub grid: TorusGrid,
    /// `|k|²` with the Nyquist entries at full magnitude.
    pub k_sq: Vec<f64>,
    /// Derivative wave numbers per axis (Nyquist zeroed).
    pub deriv: [Vec<f64>; MAX_DIM],
    /// 2/3-rule mask: true where the mode survives dealiasing.
    pub keep: Vec<bool>,
}

impl ModeTable {
    fn new(grid: TorusGrid) -> Self {
        let total = grid.total_points();
        let cutoff = grid.n as i64 / 3;
        let mut k_sq = Vec::with_capacity(total);
        let mut dx = Vec::with_capacity(total);
        let mut dy = Vec::with_capacity(total);
        let mut keep = Vec::with_capacity(total);
        for index in 0..total {
            let axes = grid.axis_indices(index);
            let k = grid.wave_vector(index);
            k_sq.push((k[0] * k[0] + k[1] * k[1]) as f64);
            let d = |a: usize| -> f64 {
                if a < grid.dim && grid.is_nyquist(axes[a]) {
                    0.0
                } else {
                    k[a] as f64
                }
            };
            dx.push(d(0));
            dy.push(if grid.dim > 1 { d(1) } else { 0.0 });
            keep.push(k[0].abs() <= cutoff && k[1].abs() <= cutoff);
        }
        Self {
            grid,
            k_sq,
            deriv: [dx, dy],
            keep,
        }
    }
}

/// FFT plans and scratch buffers for one grid. Not thread-safe; each worker owns one.
pub struct FftPlan {
    grid: TorusGrid,
    fwd: Arc<dyn Fft<f64>>,
    inv: Arc<dyn Fft<f64>>,
    scratch: Vec<Complex64>,
    buf: Vec<Complex64>,
    tmp: Vec<Complex64>,
}

impl std::fmt::Debug for FftPlan {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("FftPlan").field("grid", &self.grid).finish()
    }
}

impl Clone for FftPlan {
    fn clone(&self) -> Self {
        Self::new(self.grid)
    }
}

impl FftPlan {
    pub fn new(grid: TorusGrid) -> Self {
        let mut planner = FftPlanner::new();
        let fwd = planner.plan_fft_forward(grid.n);
        let inv = planner.plan_fft_inverse(grid.n);
        let scratch_len = fwd
            .get_inplace_scratch_len()
            .max(inv.get_inplace_scratch_len());
        let total = grid.total_points();
        Self {
            grid,
            fwd,
            inv,
            scratch: vec![Complex64::default(); scratch_len],
            buf: vec![Complex64::default(); total],
            tmp: vec![Complex64::default(); total],
        }
    }

    pub fn grid(&self) -> TorusGrid {
        self.grid
    }

    fn transform(&mut self, inverse: bool) {
        let fft = if inverse { &self.inv } else { &self.fwd };
        fft.process_with_scratch(&mut self.buf, &mut self.scratch);
        if self.grid.dim == 2 {
            let n = self.grid.n;
            transpose(&self.buf, &mut self.tmp, n);
            fft.process_with_scratch(&mut self.tmp, &mut self.scratch);
            transpose(&self.tmp, &mut self.buf, n);
        }
    }

    /// Normalised forward transform of real values.
    pub fn forward(&mut self, values: &[f64], out: &mut [Complex64]) {
        let norm = 1.0 / self.grid.total_points() as f64;
        for (b, &v) in self.buf.iter_mut().zip(values) {
            *b = Complex64::new(v, 0.0);
        }
        self.transform(false);
        for (o, b) in out.iter_mut().zip(&self.buf) {
            *o = b * norm;
        }
    }

    /// Inverse transform; the imaginary part (round-off for Hermitian input) is dropped.
    pub fn inverse(&mut self, coeffs: &[Complex64], out: &mut [f64]) {
        self.buf.copy_from_slice(coeffs);
        self.transform(true);
        for (o, b) in out.iter_mut().zip(&self.buf) {
            *o = b.re;
        }
    }

    /// Inverse transform of `mult[i] * coeffs[i]`, avoiding an extra buffer at call sites.
    pub fn inverse_scaled(
        &mut self,
        coeffs: &[Complex64],
        mult: impl Fn(usize) -> Complex64,
        out: &mut [f64],
    ) {
        for (i, (b, c)) in self.buf.iter_mut().zip(coeffs).enumerate() {
            *b = c * mult(i);
        }
        self.transform(true);
        for (o, b) in out.iter_mut().zip(&self.buf) {
            *o = b.re;
        }
    }
}

fn transpose(src: &[Complex64], dst: &mut [Complex64], n: usize) {
    for i in 0..n {
        for j in 0..n {
            dst[j * n + i] = src[i * n + j];
        }
    }
}

thread_local! {
    static PLANS: RefCell<HashMap<TorusGrid, FftPlan>> = RefCell::new(HashMap::new());
}

/// Run `f` with this thread's cached plan for `grid`.
pub fn with_plan<R>(grid: TorusGrid, f: impl FnOnce(&mut FftPlan) -> R) -> R {
    PLANS.with(|plans| {
        let mut plans = plans.borrow_mut();
        let plan = plans.entry(grid).or_insert_with(|| FftPlan::new(grid));
        f(plan)
    })
}

/// Fourier coefficients of a real periodic field.
#[derive(Debug, Clone, PartialEq)]
pub struct Spectrum {
    pub grid: TorusGrid,
    pub coeffs: Vec<Complex64>,
}

impl Spectrum {
    pub fn coeff(&self, k: [i64; MAX_DIM]) -> Option<Complex64> {
        self.grid.index_of_wave(k).map(|i| self.coeffs[i])
    }

    pub fn to_field(&self) -> PeriodicField {
        let mut values = vec![0.0; self.grid.total_points()];
        with_plan(self.grid, |p| p.inverse(&self.coeffs, &mut values));
        PeriodicField {
            grid: self.grid,
            values,
        }
    }

    /// Zero every mode outside the 2/3-rule band.
    pub fn dealias(&mut self) {
        let cutoff = self.grid.n as i64 / 3;
        for (i, c) in self.coeffs.iter_mut().enumerate() {
            let k = self.grid.wave_vector(i);
            if k[0].abs() > cutoff || k[1].abs() > cutoff {
                *c = Complex64::default();
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct PeriodicField {
    grid: TorusGrid,
    values: Vec<f64>,
}

impl PeriodicField {
    pub fn new(grid: TorusGrid, values: Vec<f64>) -> Result<Self> {
        if values.len() != grid.total_points() {
            return Err(Error::InvalidGrid(format!(
                "expected {} values, got {}",
                grid.total_points(),
                values.len()
            )));
        }
        if let Some(i) = values.iter().position(|v| !v.is_finite()) {
            return Err(Error::InvalidParameter {
                name: "values",
                reason: format!("non-finite value at index {i}"),
            });
        }
        Ok(Self { grid, values })
    }

    pub(crate) fn from_raw(grid: TorusGrid, values: Vec<f64>) -> Self {
        debug_assert_eq!(values.len(), grid.total_points());
        Self { grid, values }
    }

    pub fn grid(&self) -> TorusGrid {
        self.grid
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn values_mut(&mut self) -> &mut [f64] {
        &mut self.values
    }

    pub fn into_values(self) -> Vec<f64> {
        self.values
    }

    pub fn map(&self, f: impl Fn(f64) -> f64) -> PeriodicField {
        Self::from_raw(self.grid, self.values.iter().map(|&v| f(v)).collect())
    }

    pub fn zip_with(&self, other: &PeriodicField, f: impl Fn(f64, f64) -> f64) -> Result<Self> {
        if self.grid != other.grid {
            return Err(Error::GridMismatch);
        }
        Ok(Self::from_raw(
            self.grid,
            self.values
                .iter()
                .zip(&other.values)
                .map(|(&a, &b)| f(a, b))
                .collect(),
        ))
    }

    pub fn add(&self, other: &PeriodicField) -> Result<Self> {
        self.zip_with(other, |a, b| a + b)
    }

    pub fn sub(&self, other: &PeriodicField) -> Result<Self> {
        self.zip_with(other, |a, b| a - b)
    }

    pub fn scale(&self, s: f64) -> Self {
        self.map(|v| s * v)
    }

    pub fn mean(&self) -> f64 {
        self.values.iter().sum::<f64>() / self.values.len() as f64
    }

    /// `⟨u, v⟩ = ∫ u v dx` by the grid rule.
    pub fn inner(&self, other: &PeriodicField) -> Result<f64> {
        if self.grid != other.grid {
            return Err(Error::GridMismatch);
        }
        Ok(dot(&self.values, &other.values) / self.values.len() as f64)
    }

    pub fn to_spectral(&self) -> Spectrum {
        let mut coeffs = vec![Complex64::default(); self.grid.total_points()];
        with_plan(self.grid, |p| p.forward(&self.values, &mut coeffs));
        Spectrum {
            grid: self.grid,
            coeffs,
        }
    }

    /// Bessel-potential norm `(Σ_k (1+4π²|k|²)^a |ĉ_k|²)^{1/2}`.
    pub fn sobolev_norm(&self, a: f64) -> Result<f64> {
        if a < 0.0 || a.is_nan() {
            return Err(Error::NegativeOrder(a));
        }
        let spec = self.to_spectral();
        let table = self.grid.mode_table();
        Ok(spec
            .coeffs
            .iter()
            .zip(&table.k_sq)
            .map(|(c, &k2)| (1.0 + 4.0 * PI * PI * k2).powf(a) * c.norm_sqr())
            .sum::<f64>()
            .sqrt())
    }

    /// `‖Du‖_H`, zero exactly on constants.
    pub fn h1_seminorm(&self) -> f64 {
        let spec = self.to_spectral();
        let table = self.grid.mode_table();
        spectral_seminorm_sq(&spec.coeffs, &table.k_sq).sqrt()
    }

    /// Midpoint-rule `L^p` norm; `p = ∞` gives the grid maximum.
    pub fn lp_norm(&self, p: f64) -> Result<f64> {
        if p.is_infinite() && p > 0.0 {
            return Ok(self.values.iter().fold(0.0_f64, |m, v| m.max(v.abs())));
        }
        if !(p >= 1.0) {
            return Err(Error::InvalidExponent(p));
        }
        let n = self.values.len() as f64;
        if p == 1.0 {
            return Ok(self.values.iter().map(|v| v.abs()).sum::<f64>() / n);
        }
        if p == 2.0 {
            return Ok((dot(&self.values, &self.values) / n).sqrt());
        }
        Ok((self.values.iter().map(|v| v.abs().powf(p)).sum::<f64>() / n).powf(1.0 / p))
    }

    pub fn l2_norm(&self) -> f64 {
        (dot(&self.values, &self.values) / self.values.len() as f64).sqrt()
    }

    pub fn gradient(&self) -> VectorField {
        let spec = self.to_spectral();
        let table = self.grid.mode_table();
        let components = (0..self.grid.dim)
            .map(|a| {
                let mut out = vec![0.0; self.grid.total_points()];
                with_plan(self.grid, |p| {
                    p.inverse_scaled(
                        &spec.coeffs,
                        |i| Complex64::new(0.0, 2.0 * PI * table.deriv[a][i]),
                        &mut out,
                    )
                });
                PeriodicField::from_raw(self.grid, out)
            })
            .collect();
        VectorField {
            grid: self.grid,
            components,
        }
    }

    /// Spectral Laplacian with multiplier `-4π²|k|²`.
    pub fn laplacian(&self) -> PeriodicField {
        let spec = self.to_spectral();
        let table = self.grid.mode_table();
        let mut out = vec![0.0; self.grid.total_points()];
        with_plan(self.grid, |p| {
            p.inverse_scaled(
                &spec.coeffs,
                |i| Complex64::new(-4.0 * PI * PI * table.k_sq[i], 0.0),
                &mut out,
            )
        });
        PeriodicField::from_raw(self.grid, out)
    }

    /// Project onto the 2/3-rule band.
    pub fn dealiased(&self) -> PeriodicField {
        let mut spec = self.to_spectral();
        spec.dealias();
        spec.to_field()
    }
}

pub(crate) fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

pub(crate) fn spectral_l2_sq(coeffs: &[Complex64]) -> f64 {
    coeffs.iter().map(|c| c.norm_sqr()).sum()
}

pub(crate) fn spectral_seminorm_sq(coeffs: &[Complex64], k_sq: &[f64]) -> f64 {
    4.0 * PI
        * PI
        * coeffs
            .iter()
            .zip(k_sq)
            .map(|(c, &k2)| k2 * c.norm_sqr())
            .sum::<f64>()
}

#[derive(Debug, Clone, PartialEq)]
pub struct VectorField {
    grid: TorusGrid,
    components: Vec<PeriodicField>,
}

impl VectorField {
    pub fn new(components: Vec<PeriodicField>) -> Result<Self> {
        let grid = components
            .first()
            .map(|c| c.grid)
            .ok_or_else(|| Error::InvalidGrid("vector field needs components".into()))?;
        if components.len() != grid.dim || components.iter().any(|c| c.grid != grid) {
            return Err(Error::GridMismatch);
        }
        Ok(Self { grid, components })
    }

    pub fn grid(&self) -> TorusGrid {
        self.grid
    }

    pub fn components(&self) -> &[PeriodicField] {
        &self.components
    }

    pub fn component(&self, axis: usize) -> &PeriodicField {
        &self.components[axis]
    }

    pub fn divergence(&self) -> PeriodicField {
        let table = self.grid.mode_table();
        let total = self.grid.total_points();
        let mut acc = vec![Complex64::default(); total];
        for (a, comp) in self.components.iter().enumerate() {
            let spec = comp.to_spectral();
            for (i, c) in spec.coeffs.iter().enumerate() {
                acc[i] += c * Complex64::new(0.0, 2.0 * PI * table.deriv[a][i]);
            }
        }
        Spectrum {
            grid: self.grid,
            coeffs: acc,
        }
        .to_field()
    }

    pub fn inner(&self, other: &VectorField) -> Result<f64> {
        if self.grid != other.grid {
            return Err(Error::GridMismatch);
        }
        self.components
            .iter()
            .zip(&other.components)
            .map(|(a, b)| a.inner(b))
            .sum()
    }

    pub fn l2_norm(&self) -> f64 {
        self.components
            .iter()
            .map(|c| c.l2_norm().powi(2))
            .sum::<f64>()
            .sqrt()
    }
}

/// Matrix-valued field, entries stored row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct MatrixField {
    grid: TorusGrid,
    entries: Vec<PeriodicField>,
}

impl MatrixField {
    pub fn new(grid: TorusGrid, entries: Vec<PeriodicField>) -> Result<Self> {
        if entries.len() != grid.dim * grid.dim || entries.iter().any(|e| e.grid != grid) {
            return Err(Error::GridMismatch);
        }
        Ok(Self { grid, entries })
    }

    pub fn grid(&self) -> TorusGrid {
        self.grid
    }

    pub fn entry(&self, i: usize, j: usize) -> &PeriodicField {
        &self.entries[i * self.grid.dim + j]
    }

    pub fn at(&self, index: usize) -> Mat2 {
        let d = self.grid.dim;
        let mut m = [[0.0; MAX_DIM]; MAX_DIM];
        for (i, row) in m.iter_mut().enumerate().take(d) {
            for (j, v) in row.iter_mut().enumerate().take(d) {
                *v = self.entries[i * d + j].values[index];
            }
        }
        m
    }

    /// Extreme eigenvalues of the symmetric part over all grid points, with the
    /// indices where they occur: `((min, argmin), (max, argmax))`.
    pub fn symmetric_eigen_range(&self) -> ((f64, usize), (f64, usize)) {
        let mut lo = (f64::INFINITY, 0);
        let mut hi = (f64::NEG_INFINITY, 0);
        for index in 0..self.grid.total_points() {
            let (a, b) = sym_eigenvalues(&self.at(index), self.grid.dim);
            if a < lo.0 {
                lo = (a, index);
            }
            if b > hi.0 {
                hi = (b, index);
            }
        }
        (lo, hi)
    }
}

/// Min and max eigenvalue of the symmetric part of the leading `dim×dim` block.
pub fn sym_eigenvalues(m: &Mat2, dim: usize) -> (f64, f64) {
    if dim == 1 {
        return (m[0][0], m[0][0]);
    }
    let a = m[0][0];
    let d = m[1][1];
    let b = 0.5 * (m[0][1] + m[1][0]);
    let mid = 0.5 * (a + d);
    let rad = (0.25 * (a - d) * (a - d) + b * b).sqrt();
    (mid - rad, mid + rad)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn g1(n: usize) -> TorusGrid {
        TorusGrid::new(1, n).unwrap()
    }

    fn random_field(grid: TorusGrid, rng: &mut impl Rng) -> PeriodicField {
        let v = (0..grid.total_points())
            .map(|_| rng.random_range(-1.0..1.0))
            .collect();
        PeriodicField::new(grid, v).unwrap()
    }

    /// Random field without Nyquist content.
    fn band_limited(grid: TorusGrid, rng: &mut impl Rng) -> PeriodicField {
        let mut spec = random_field(grid, rng).to_spectral();
        let n2 = grid.n_per_axis() as i64 / 2;
        for (i, c) in spec.coeffs.iter_mut().enumerate() {
            let k = grid.wave_vector(i);
            if k[0] == -n2 || k[1] == -n2 {
                *c = Complex64::default();
            }
        }
        spec.to_field()
    }

    #[test]
    fn grid_rejects_odd_small_or_3d() {
        assert!(TorusGrid::new(1, 7).is_err());
        assert!(TorusGrid::new(1, 6).is_err());
        assert!(TorusGrid::new(3, 8).is_err());
        assert_eq!(TorusGrid::new(2, 8).unwrap().total_points(), 64);
    }

    #[test]
    fn constant_has_only_zero_mode() {
        let g = TorusGrid::new(2, 8).unwrap();
        let spec = g.constant(2.5).to_spectral();
        for (i, c) in spec.coeffs.iter().enumerate() {
            let expect = if i == 0 { 2.5 } else { 0.0 };
            assert_abs_diff_eq!(c.re, expect, epsilon = 1e-14);
            assert_abs_diff_eq!(c.im, 0.0, epsilon = 1e-14);
        }
    }

    #[test]
    fn cosine_splits_into_two_half_modes() {
        let g = g1(16);
        let spec = g.sample(|x| (2.0 * PI * x[0]).cos()).to_spectral();
        for (i, c) in spec.coeffs.iter().enumerate() {
            let k = g.wave_vector(i)[0];
            let expect = if k.abs() == 1 { 0.5 } else { 0.0 };
            assert_abs_diff_eq!(c.re, expect, epsilon = 1e-14);
            assert_abs_diff_eq!(c.im, 0.0, epsilon = 1e-14);
        }
    }

    #[test]
    fn roundtrip_and_parseval_on_random_fields() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for trial in 0..100 {
            let g = if trial % 2 == 0 { g1(32) } else { TorusGrid::new(2, 16).unwrap() };
            let u = random_field(g, &mut rng);
            let spec = u.to_spectral();
            let back = spec.to_field();
            let err = u.sub(&back).unwrap().l2_norm() / u.l2_norm();
            assert!(err < 1e-12, "roundtrip error {err}");
            let parseval = spectral_l2_sq(&spec.coeffs);
            assert_abs_diff_eq!(u.lp_norm(2.0).unwrap().powi(2), parseval, epsilon = 1e-10);
            // Hermitian symmetry of a real field
            for (i, c) in spec.coeffs.iter().enumerate() {
                let k = g.wave_vector(i);
                if let Some(j) = g.index_of_wave([-k[0], -k[1]]) {
                    assert_abs_diff_eq!(c.re, spec.coeffs[j].re, epsilon = 1e-13);
                    assert_abs_diff_eq!(c.im, -spec.coeffs[j].im, epsilon = 1e-13);
                }
            }
        }
    }

    #[test]
    fn sine_norms_match_quadrature() {
        let g = g1(64);
        let u = g.sample(|x| (2.0 * PI * x[0]).sin());
        // trapezoid quadrature of ∫ sin² and ∫ (sin² + (2π cos)²)
        let m = 4096;
        let h = 1.0 / m as f64;
        let (mut q0, mut q1) = (0.0, 0.0);
        for j in 0..m {
            let x = j as f64 * h;
            let s = (2.0 * PI * x).sin();
            let c = 2.0 * PI * (2.0 * PI * x).cos();
            q0 += s * s * h;
            q1 += (s * s + c * c) * h;
        }
        assert_abs_diff_eq!(u.sobolev_norm(0.0).unwrap(), q0.sqrt(), epsilon = 1e-12);
        assert_abs_diff_eq!(u.sobolev_norm(0.0).unwrap(), 0.5_f64.sqrt(), epsilon = 1e-12);
        assert_abs_diff_eq!(u.sobolev_norm(1.0).unwrap(), q1.sqrt(), epsilon = 1e-10);
        assert_abs_diff_eq!(u.sobolev_norm(1.0).unwrap(), ((1.0 + 4.0 * PI * PI) / 2.0).sqrt(), epsilon = 1e-12);
        assert_abs_diff_eq!(u.sobolev_norm(1.0).unwrap(), 4.4988, epsilon = 1e-4);
        assert_abs_diff_eq!(u.h1_seminorm(), (q1 - q0).sqrt(), epsilon = 1e-10);
        assert_abs_diff_eq!(u.h1_seminorm(), 4.4429, epsilon = 1e-4);
    }

    #[test]
    fn constant_norms() {
        let g = g1(16);
        let c = g.constant(-3.0);
        for a in [0.0, 0.5, 1.0, 3.0] {
            assert_abs_diff_eq!(c.sobolev_norm(a).unwrap(), 3.0, epsilon = 1e-12);
        }
        for p in [1.0, 1.5, 2.0, 7.0, f64::INFINITY] {
            assert_abs_diff_eq!(c.lp_norm(p).unwrap(), 3.0, epsilon = 1e-12);
        }
        assert_abs_diff_eq!(c.h1_seminorm(), 0.0, epsilon = 1e-12);
    }

    #[test]
    fn rejects_negative_order_and_small_p() {
        let u = g1(8).constant(1.0);
        assert_eq!(u.sobolev_norm(-0.5), Err(Error::NegativeOrder(-0.5)));
        assert_eq!(u.lp_norm(0.5), Err(Error::InvalidExponent(0.5)));
    }

    #[test]
    fn l1_and_linf_of_sine() {
        // midpoint quadrature oracle on a fine grid
        let m = 100_000;
        let q: f64 = (0..m)
            .map(|j| ((2.0 * PI * (j as f64 + 0.5) / m as f64).sin()).abs())
            .sum::<f64>()
            / m as f64;
        assert_abs_diff_eq!(q, 2.0 / PI, epsilon = 1e-9);
        let u = g1(256).sample(|x| (2.0 * PI * x[0]).sin());
        assert_abs_diff_eq!(u.lp_norm(1.0).unwrap(), q, epsilon = 1e-4);
        let mut prev = 0.0;
        for n in [10, 20, 40, 80] {
            let linf = g1(n).sample(|x| (2.0 * PI * x[0]).sin()).lp_norm(f64::INFINITY).unwrap();
            assert!(linf <= 1.0 && linf >= prev);
            prev = linf;
        }
        assert!(prev > 0.999);
    }

    #[test]
    fn two_mode_seminorm_is_pythagorean() {
        let g = g1(32);
        let a = g.sample(|x| (2.0 * PI * x[0]).sin());
        let b = g.sample(|x| 0.3 * (6.0 * PI * x[0]).cos());
        let s = a.add(&b).unwrap().h1_seminorm();
        assert_abs_diff_eq!(s, a.h1_seminorm().hypot(b.h1_seminorm()), epsilon = 1e-12);
    }

    #[test]
    fn laplacian_of_sine_and_gradient_of_constant() {
        let g = g1(32);
        let u = g.sample(|x| (2.0 * PI * x[0]).sin());
        let lap = u.gradient().divergence();
        let expect = u.scale(-4.0 * PI * PI);
        assert!(lap.sub(&expect).unwrap().lp_norm(f64::INFINITY).unwrap() < 1e-10);
        let zero = g.constant(4.0).gradient();
        assert!(zero.l2_norm() < 1e-14);
    }

    #[test]
    fn divergence_has_zero_mean_and_matches_laplacian() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        for g in [g1(32), TorusGrid::new(2, 16).unwrap()] {
            for _ in 0..10 {
                let comps = (0..g.dim()).map(|_| random_field(g, &mut rng)).collect();
                let vf = VectorField::new(comps).unwrap();
                assert!(vf.divergence().mean().abs() < 1e-12);
                let u = band_limited(g, &mut rng);
                let dg = u.gradient().divergence();
                let err = dg.sub(&u.laplacian()).unwrap().lp_norm(f64::INFINITY).unwrap();
                assert!(err < 1e-10, "div grad vs laplacian: {err}");
                // seminorm equals the gradient norm away from Nyquist
                assert_abs_diff_eq!(u.h1_seminorm(), u.gradient().l2_norm(), epsilon = 1e-10);
            }
        }
    }

    #[test]
    fn integration_by_parts() {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        for g in [g1(32), TorusGrid::new(2, 16).unwrap()] {
            for _ in 0..20 {
                let u = random_field(g, &mut rng);
                let v = VectorField::new((0..g.dim()).map(|_| random_field(g, &mut rng)).collect())
                    .unwrap();
                let lhs = u.gradient().inner(&v).unwrap();
                let rhs = -u.inner(&v.divergence()).unwrap();
                assert_abs_diff_eq!(lhs, rhs, epsilon = 1e-10);
            }
        }
    }

    #[test]
    fn dealias_keeps_low_modes_only() {
        let g = g1(32);
        let u = g.sample(|x| (2.0 * PI * x[0]).sin() + (2.0 * PI * 12.0 * x[0]).cos());
        let d = u.dealiased();
        let low = g.sample(|x| (2.0 * PI * x[0]).sin());
        assert!(d.sub(&low).unwrap().l2_norm() < 1e-13);
    }

    #[test]
    fn eigen_range_of_matrix_field() {
        let g = TorusGrid::new(2, 8).unwrap();
        let e = vec![g.constant(2.0), g.constant(1.0), g.constant(1.0), g.constant(2.0)];
        let m = MatrixField::new(g, e).unwrap();
        let ((lo, _), (hi, _)) = m.symmetric_eigen_range();
        assert_abs_diff_eq!(lo, 1.0, epsilon = 1e-14);
        assert_abs_diff_eq!(hi, 3.0, epsilon = 1e-14);
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(64))]
        #[test]
        fn sobolev_norm_monotone_in_order(seed in any::<u64>(), a1 in 0.0f64..3.0, da in 0.0f64..3.0) {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let u = random_field(g1(16), &mut rng);
            let n1 = u.sobolev_norm(a1).unwrap();
            let n2 = u.sobolev_norm(a1 + da).unwrap();
            prop_assert!(n1 <= n2 * (1.0 + 1e-14));
        }
    }
}
