//! Coefficient triples `(B, A, σ)` and the noise-mode basis.
//!
//! Noise modes are products `σ_k(t, y) = q_k τ(t) s(y)` acting on a spatial
//! profile `e_k(x)`: `σ(t,u)ē_k = e_k(x) σ_k(t, u(x))`. With the uniform basis
//! (`e_k ≡ 1`) this is the x-independent action of the multiplicative model;
//! the Fourier basis gives each mode its own trigonometric profile.

mod registry;
mod validate;

pub use registry::{build_set, preset_names};
pub use validate::{
    h3_proxy_check, noise_ha_norm_sq, validate_h1, validate_h2, Clause, ClauseKind,
    ValidationFailure, ValidationReport, DEFAULT_Y_BOX, VIOLATION_TOL,
};

use std::f64::consts::PI;
use std::fmt;
use std::sync::Arc;

use crate::error::{Error, Result};
use crate::field::{Mat2, PeriodicField, TorusGrid, MAX_DIM};

type DynScalar = Arc<dyn Fn(f64) -> f64 + Send + Sync>;
type DynMatrix = Arc<dyn Fn(f64) -> Mat2 + Send + Sync>;

/// Scalar function of one real variable with known bounds.
#[derive(Clone)]
pub enum ScalarMap {
    Zero,
    Constant(f64),
    /// `a·y`
    Linear(f64),
    /// `offset + amp·sin(y)`
    Sine { offset: f64, amp: f64 },
    /// `a·y²` (not globally Lipschitz; used to exercise the validators).
    Square(f64),
    /// `y²/2` for `|y| ≤ cap`, continued linearly with slope `±cap` beyond.
    CappedBurgers { cap: f64 },
    Custom { label: String, f: DynScalar },
}

impl fmt::Debug for ScalarMap {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Self::Zero => write!(f, "Zero"),
            Self::Constant(c) => write!(f, "Constant({c})"),
            Self::Linear(a) => write!(f, "Linear({a})"),
            Self::Sine { offset, amp } => write!(f, "Sine({offset} + {amp} sin y)"),
            Self::Square(a) => write!(f, "Square({a})"),
            Self::CappedBurgers { cap } => write!(f, "CappedBurgers({cap})"),
            Self::Custom { label, .. } => write!(f, "Custom({label})"),
        }
    }
}

const FD_STEP: f64 = 1e-6;

impl ScalarMap {
    pub fn custom(label: impl Into<String>, f: impl Fn(f64) -> f64 + Send + Sync + 'static) -> Self {
        Self::Custom {
            label: label.into(),
            f: Arc::new(f),
        }
    }

    #[inline]
    pub fn eval(&self, y: f64) -> f64 {
        match self {
            Self::Zero => 0.0,
            Self::Constant(c) => *c,
            Self::Linear(a) => a * y,
            Self::Sine { offset, amp } => offset + amp * y.sin(),
            Self::Square(a) => a * y * y,
            Self::CappedBurgers { cap } => {
                if y.abs() <= *cap {
                    0.5 * y * y
                } else {
                    cap * y.abs() - 0.5 * cap * cap
                }
            }
            Self::Custom { f, .. } => f(y),
        }
    }

    #[inline]
    pub fn derivative(&self, y: f64) -> f64 {
        match self {
            Self::Zero | Self::Constant(_) => 0.0,
            Self::Linear(a) => *a,
            Self::Sine { amp, .. } => amp * y.cos(),
            Self::Square(a) => 2.0 * a * y,
            Self::CappedBurgers { cap } => y.clamp(-cap, *cap),
            Self::Custom { f, .. } => (f(y + FD_STEP) - f(y - FD_STEP)) / (2.0 * FD_STEP),
        }
    }

    pub fn is_constant(&self) -> bool {
        matches!(self, Self::Zero | Self::Constant(_))
    }

    pub fn is_zero(&self) -> bool {
        match self {
            Self::Zero => true,
            Self::Constant(c) | Self::Linear(c) | Self::Square(c) => *c == 0.0,
            Self::Sine { offset, amp } => *offset == 0.0 && *amp == 0.0,
            _ => false,
        }
    }

    /// Smallest `L` with `|s(y₁) − s(y₂)| ≤ L|y₁ − y₂|`; `None` if unbounded or unknown.
    pub fn lipschitz(&self) -> Option<f64> {
        match self {
            Self::Zero | Self::Constant(_) => Some(0.0),
            Self::Linear(a) => Some(a.abs()),
            Self::Sine { amp, .. } => Some(amp.abs()),
            Self::Square(a) => (*a == 0.0).then_some(0.0),
            Self::CappedBurgers { cap } => Some(*cap),
            Self::Custom { .. } => None,
        }
    }

    /// Smallest `G` with `s(y)² ≤ G(1 + y²)`; `None` if unbounded or unknown.
    pub fn growth(&self) -> Option<f64> {
        match self {
            Self::Zero => Some(0.0),
            Self::Constant(c) => Some(c * c),
            Self::Linear(a) => Some(a * a),
            Self::Sine { offset, amp } => Some((offset.abs() + amp.abs()).powi(2)),
            Self::Square(a) => (*a == 0.0).then_some(0.0),
            // |s(y)| ≤ cap·|y|
            Self::CappedBurgers { cap } => Some(cap * cap),
            Self::Custom { .. } => None,
        }
    }

    /// `(inf, sup)` of the map over all reals, when bounded.
    pub fn range(&self) -> Option<(f64, f64)> {
        match self {
            Self::Zero => Some((0.0, 0.0)),
            Self::Constant(c) => Some((*c, *c)),
            Self::Sine { offset, amp } => Some((offset - amp.abs(), offset + amp.abs())),
            _ => None,
        }
    }
}

/// Flux `B(y) = profile(y)·direction`.
#[derive(Debug, Clone)]
pub struct FluxSpec {
    pub profile: ScalarMap,
    pub direction: [f64; MAX_DIM],
    /// Declared Lipschitz constant `L_B` (Euclidean, over the vector `B`).
    pub lipschitz: f64,
}

impl FluxSpec {
    pub fn new(profile: ScalarMap, direction: [f64; MAX_DIM]) -> Result<Self> {
        let norm = direction[0].hypot(direction[1]);
        let lipschitz = profile.lipschitz().ok_or_else(|| Error::InvalidParameter {
            name: "flux",
            reason: format!("{profile:?} has no global Lipschitz bound; declare one explicitly"),
        })? * norm;
        Ok(Self {
            profile,
            direction,
            lipschitz,
        })
    }

    pub fn zero() -> Self {
        Self {
            profile: ScalarMap::Zero,
            direction: [0.0; MAX_DIM],
            lipschitz: 0.0,
        }
    }

    /// Burgers flux `y²/2` along the diagonal, capped at `|y| ≤ cap`.
    pub fn burgers(dim: usize, cap: f64) -> Result<Self> {
        if !(cap > 0.0 && cap.is_finite()) {
            return Err(Error::InvalidParameter {
                name: "cap",
                reason: format!("must be positive and finite (got {cap})"),
            });
        }
        let direction = if dim == 1 { [1.0, 0.0] } else { [1.0, 1.0] };
        Self::new(ScalarMap::CappedBurgers { cap }, direction)
    }

    pub fn is_zero(&self) -> bool {
        self.profile.is_zero() || self.direction == [0.0; MAX_DIM]
    }

    #[inline]
    pub fn eval(&self, y: f64) -> [f64; MAX_DIM] {
        let p = self.profile.eval(y);
        [p * self.direction[0], p * self.direction[1]]
    }

    /// `C_B = max(|B(0)|, L_B)` as used in the growth clause of the flux.
    pub fn growth_constant(&self) -> f64 {
        let b0 = self.eval(0.0);
        b0[0].hypot(b0[1]).max(self.lipschitz)
    }
}

#[derive(Clone)]
pub enum DiffusionKind {
    /// `A(y) = a(y)·I`
    Isotropic(ScalarMap),
    Matrix { label: String, f: DynMatrix },
}

impl fmt::Debug for DiffusionKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Self::Isotropic(a) => write!(f, "Isotropic({a:?})"),
            Self::Matrix { label, .. } => write!(f, "Matrix({label})"),
        }
    }
}

/// Diffusion matrix with declared ellipticity window `ρI ≤ A ≤ C_A I`.
#[derive(Debug, Clone)]
pub struct DiffusionSpec {
    pub kind: DiffusionKind,
    pub rho: f64,
    pub upper: f64,
    /// Declared entrywise Lipschitz constant `L_A`.
    pub lipschitz: f64,
}

impl DiffusionSpec {
    pub fn identity() -> Self {
        Self::isotropic_constant(1.0).expect("identity is elliptic")
    }

    pub fn isotropic_constant(c: f64) -> Result<Self> {
        if !(c > 0.0 && c.is_finite()) {
            return Err(Error::InvalidParameter {
                name: "diffusion",
                reason: format!("constant must be positive (got {c})"),
            });
        }
        Ok(Self {
            kind: DiffusionKind::Isotropic(ScalarMap::Constant(c)),
            rho: c,
            upper: c,
            lipschitz: 0.0,
        })
    }

    /// `A(y) = (1 + amp·sin y)·I`, with `ρ = 1 − amp` and `C_A = 1 + amp`.
    pub fn sin_modulated(amp: f64) -> Result<Self> {
        if !(0.0..1.0).contains(&amp) {
            return Err(Error::InvalidParameter {
                name: "amp",
                reason: format!("must lie in [0, 1) for ellipticity (got {amp})"),
            });
        }
        Ok(Self {
            kind: DiffusionKind::Isotropic(ScalarMap::Sine { offset: 1.0, amp }),
            rho: 1.0 - amp,
            upper: 1.0 + amp,
            lipschitz: amp,
        })
    }

    pub fn matrix(
        label: impl Into<String>,
        f: impl Fn(f64) -> Mat2 + Send + Sync + 'static,
        rho: f64,
        upper: f64,
        lipschitz: f64,
    ) -> Self {
        Self {
            kind: DiffusionKind::Matrix {
                label: label.into(),
                f: Arc::new(f),
            },
            rho,
            upper,
            lipschitz,
        }
    }

    /// Override the declared constants (used to test validators).
    pub fn with_declared(mut self, rho: f64, upper: f64, lipschitz: f64) -> Self {
        self.rho = rho;
        self.upper = upper;
        self.lipschitz = lipschitz;
        self
    }

    #[inline]
    pub fn eval(&self, y: f64) -> Mat2 {
        match &self.kind {
            DiffusionKind::Isotropic(a) => {
                let v = a.eval(y);
                [[v, 0.0], [0.0, v]]
            }
            DiffusionKind::Matrix { f, .. } => f(y),
        }
    }

    /// The constant matrix when `A` does not depend on `y`.
    pub fn constant_value(&self) -> Option<Mat2> {
        match &self.kind {
            DiffusionKind::Isotropic(a) if a.is_constant() => Some(self.eval(0.0)),
            _ => None,
        }
    }

    pub fn is_isotropic(&self) -> bool {
        matches!(self.kind, DiffusionKind::Isotropic(_))
    }

    /// Coefficient used for the implicit part of the IMEX split.
    pub fn implicit_coefficient(&self) -> f64 {
        self.rho.max(0.5 * self.upper)
    }
}

/// Spatial profiles `e_k(x)` attached to the noise modes.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SpatialBasis {
    /// `e_k ≡ 1` for every mode.
    Uniform,
    /// `1, √2 cos 2πκ·x, √2 sin 2πκ·x, …` ordered by `|κ|`.
    Fourier,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Trig {
    One,
    Cos,
    Sin,
}

/// Wave vector and trigonometric type of the `k`-th Fourier profile (`k` from 0).
pub fn fourier_profile(k: usize, dim: usize) -> ([i64; MAX_DIM], Trig) {
    if k == 0 {
        return ([0, 0], Trig::One);
    }
    let j = (k - 1) / 2;
    let trig = if (k - 1).is_multiple_of(2) { Trig::Cos } else { Trig::Sin };
    if dim == 1 {
        return ([j as i64 + 1, 0], trig);
    }
    (half_plane_vectors(j + 1)[j], trig)
}

/// The first `count` wave vectors of the half plane, ordered by `|κ|²` then lexicographically.
fn half_plane_vectors(count: usize) -> Vec<[i64; MAX_DIM]> {
    let mut radius = 1i64;
    loop {
        let mut v: Vec<[i64; 2]> = Vec::new();
        for a in 0..=radius {
            for b in -radius..=radius {
                if a > 0 || b > 0 {
                    v.push([a, b]);
                }
            }
        }
        v.sort_by_key(|k| (k[0] * k[0] + k[1] * k[1], k[0], k[1]));
        // every vector with |κ|² ≤ radius² is present, so the prefix is final
        let complete = v.iter().take_while(|k| k[0] * k[0] + k[1] * k[1] <= radius * radius).count();
        if complete >= count {
            v.truncate(count);
            return v;
        }
        radius *= 2;
    }
}

/// Grid samples of the spatial profiles, `values[k][x]`.
#[derive(Debug, Clone)]
pub struct BasisTable {
    pub values: Vec<Vec<f64>>,
    /// `sup_x e_k(x)²`: 1 for the constant profile, 2 otherwise.
    pub weights: Vec<f64>,
    /// Wave vectors of each profile (zero for uniform).
    pub waves: Vec<[i64; MAX_DIM]>,
    pub trig: Vec<Trig>,
}

impl BasisTable {
    pub fn new(basis: SpatialBasis, n_modes: usize, grid: TorusGrid) -> Self {
        let total = grid.total_points();
        match basis {
            SpatialBasis::Uniform => Self {
                values: vec![vec![1.0; total]; n_modes],
                weights: vec![1.0; n_modes],
                waves: vec![[0, 0]; n_modes],
                trig: vec![Trig::One; n_modes],
            },
            SpatialBasis::Fourier => {
                let mut values = Vec::with_capacity(n_modes);
                let mut weights = Vec::with_capacity(n_modes);
                let mut waves = Vec::with_capacity(n_modes);
                let mut trigs = Vec::with_capacity(n_modes);
                for k in 0..n_modes {
                    let (kappa, trig) = fourier_profile(k, grid.dim());
                    let row = (0..total)
                        .map(|i| {
                            let x = grid.coords(i);
                            let phase = 2.0 * PI * (kappa[0] as f64 * x[0] + kappa[1] as f64 * x[1]);
                            match trig {
                                Trig::One => 1.0,
                                Trig::Cos => 2f64.sqrt() * phase.cos(),
                                Trig::Sin => 2f64.sqrt() * phase.sin(),
                            }
                        })
                        .collect();
                    values.push(row);
                    weights.push(if trig == Trig::One { 1.0 } else { 2.0 });
                    waves.push(kappa);
                    trigs.push(trig);
                }
                Self {
                    values,
                    weights,
                    waves,
                    trig: trigs,
                }
            }
        }
    }
}

/// Mode amplitude families.
pub fn geometric_amplitudes(n_modes: usize, ratio: f64) -> Vec<f64> {
    (1..=n_modes).map(|k| ratio.powi(-(k as i32))).collect()
}

pub fn power_amplitudes(n_modes: usize, s: f64) -> Vec<f64> {
    (1..=n_modes).map(|k| (k as f64).powf(-s)).collect()
}

/// Truncated noise `σ_k(t, y) = q_k τ(t) s(y)` with spatial profiles `e_k`.
#[derive(Debug, Clone)]
pub struct NoiseSpec {
    pub shape: ScalarMap,
    pub amplitudes: Vec<f64>,
    pub basis: SpatialBasis,
    /// Time modulation `τ(t)`; `None` means `τ ≡ 1`.
    pub time_factor: Option<ScalarMap>,
    /// Declared `C_σ` in `Σ_k ‖σ_k e_k‖² ≤ C_σ(1 + y²)`.
    pub growth: f64,
    /// Declared `L_σ` in `Σ_k |σ_k(y₁) − σ_k(y₂)|² ≤ L_σ|y₁ − y₂|²`.
    pub lipschitz: f64,
    /// Declared constant of the H¹ growth clause.
    pub h2_constant: f64,
}

impl NoiseSpec {
    /// Build a spec and derive the declared constants from the shape.
    pub fn new(shape: ScalarMap, amplitudes: Vec<f64>, basis: SpatialBasis) -> Result<Self> {
        if amplitudes.is_empty() {
            return Err(Error::InvalidParameter {
                name: "modes",
                reason: "at least one noise mode is required".into(),
            });
        }
        if let Some(q) = amplitudes.iter().find(|q| !q.is_finite()) {
            return Err(Error::InvalidParameter {
                name: "amplitudes",
                reason: format!("non-finite amplitude {q}"),
            });
        }
        let mut spec = Self {
            shape,
            amplitudes,
            basis,
            time_factor: None,
            growth: 0.0,
            lipschitz: 0.0,
            h2_constant: 0.0,
        };
        spec.redeclare();
        Ok(spec)
    }

    pub fn zero() -> Self {
        Self::new(ScalarMap::Zero, vec![0.0], SpatialBasis::Uniform).expect("valid")
    }

    pub fn with_time_factor(mut self, tau: ScalarMap) -> Self {
        self.time_factor = Some(tau);
        self.redeclare();
        self
    }

    pub fn with_declared(mut self, growth: f64, lipschitz: f64, h2: f64) -> Self {
        self.growth = growth;
        self.lipschitz = lipschitz;
        self.h2_constant = h2;
        self
    }

    /// Recompute the declared constants from the shape bounds. Unknown bounds
    /// become `+∞`, which the validators report rather than reject.
    fn redeclare(&mut self) {
        let tau_sup = match &self.time_factor {
            None => 1.0,
            Some(t) => t
                .range()
                .map(|(lo, hi)| lo.abs().max(hi.abs()))
                .unwrap_or_else(|| sup_on_unit_interval(t)),
        };
        let weights = self.mode_weights();
        let factor: Vec<f64> = self.h2_mode_factors();
        let g = self.shape.growth().unwrap_or(f64::INFINITY);
        let l = self.shape.lipschitz().unwrap_or(f64::INFINITY);
        let t2 = tau_sup * tau_sup;
        let mut growth = 0.0;
        let mut lip = 0.0;
        let mut h2 = 0.0;
        for ((q, w), fac) in self.amplitudes.iter().zip(&weights).zip(&factor) {
            let q2 = q * q * t2;
            if q2 == 0.0 {
                continue;
            }
            growth += w * q2 * g;
            lip += w * q2 * l * l;
            h2 += q2 * fac * g.max(l * l);
        }
        self.growth = growth;
        self.lipschitz = lip;
        self.h2_constant = h2;
    }

    fn mode_weights(&self) -> Vec<f64> {
        (0..self.n_modes())
            .map(|k| match self.basis {
                SpatialBasis::Uniform => 1.0,
                SpatialBasis::Fourier => {
                    if k == 0 {
                        1.0
                    } else {
                        2.0
                    }
                }
            })
            .collect()
    }

    /// Per-mode factor bounding `‖e_k g‖²_{H¹}` by `max(G, D²)(1 + ‖u‖²_{H¹})`.
    fn h2_mode_factors(&self) -> Vec<f64> {
        (0..self.n_modes())
            .map(|k| match self.basis {
                SpatialBasis::Uniform => 1.0,
                SpatialBasis::Fourier => {
                    // dimension only enters through |κ|; the 2-D ordering dominates the 1-D one
                    let (kappa, trig) = fourier_profile(k, MAX_DIM);
                    let (k1, _) = fourier_profile(k, 1);
                    let kk = (kappa[0] * kappa[0] + kappa[1] * kappa[1]).max(k1[0] * k1[0]) as f64;
                    if trig == Trig::One {
                        1.0
                    } else {
                        (2.0 + 16.0 * PI * PI * kk).max(4.0)
                    }
                }
            })
            .collect()
    }

    pub fn n_modes(&self) -> usize {
        self.amplitudes.len()
    }

    pub fn is_zero(&self) -> bool {
        self.shape.is_zero() || self.amplitudes.iter().all(|&q| q == 0.0)
    }

    /// True when `σ` does not depend on the state.
    pub fn is_additive(&self) -> bool {
        self.shape.is_constant()
    }

    #[inline]
    pub fn time_factor(&self, t: f64) -> f64 {
        self.time_factor.as_ref().map_or(1.0, |tau| tau.eval(t))
    }

    /// Scalar value `σ_k(t, y)` (without the spatial profile).
    pub fn sigma(&self, k: usize, t: f64, y: f64) -> f64 {
        self.amplitudes[k] * self.time_factor(t) * self.shape.eval(y)
    }

    pub fn sigma_dy(&self, k: usize, t: f64, y: f64) -> f64 {
        self.amplitudes[k] * self.time_factor(t) * self.shape.derivative(y)
    }

    pub fn basis_table(&self, grid: TorusGrid) -> BasisTable {
        BasisTable::new(self.basis, self.n_modes(), grid)
    }

    /// `Σ_k coeffs_k e_k(x)` on the grid, written into `out`.
    pub(crate) fn combine_profiles(&self, table: &BasisTable, coeffs: &[f64], out: &mut [f64]) {
        match self.basis {
            SpatialBasis::Uniform => {
                let s: f64 = coeffs.iter().zip(&self.amplitudes).map(|(c, q)| c * q).sum();
                out.fill(s);
            }
            SpatialBasis::Fourier => {
                out.fill(0.0);
                for ((c, q), row) in coeffs.iter().zip(&self.amplitudes).zip(&table.values) {
                    let w = c * q;
                    if w != 0.0 {
                        for (o, e) in out.iter_mut().zip(row) {
                            *o += w * e;
                        }
                    }
                }
            }
        }
    }

    /// `Σ_k coeffs_k σ(t, u)ē_k` as a field.
    pub fn apply(&self, t: f64, u: &PeriodicField, coeffs: &[f64]) -> Result<PeriodicField> {
        if coeffs.len() != self.n_modes() {
            return Err(Error::InvalidParameter {
                name: "coeffs",
                reason: format!("expected {} coefficients, got {}", self.n_modes(), coeffs.len()),
            });
        }
        let grid = u.grid();
        let table = self.basis_table(grid);
        let mut out = vec![0.0; grid.total_points()];
        self.combine_profiles(&table, coeffs, &mut out);
        let tau = self.time_factor(t);
        for (o, &y) in out.iter_mut().zip(u.values()) {
            *o *= tau * self.shape.eval(y);
        }
        Ok(PeriodicField::from_raw(grid, out))
    }

    /// Hilbert–Schmidt norm `Σ_k ‖σ(t,u)ē_k‖²_H` by grid quadrature.
    pub fn hs_norm_sq(&self, t: f64, u: &PeriodicField) -> f64 {
        let table = self.basis_table(u.grid());
        self.hs_norm_sq_with(&table, t, u.values())
    }

    pub(crate) fn hs_norm_sq_with(&self, table: &BasisTable, t: f64, u: &[f64]) -> f64 {
        let tau = self.time_factor(t);
        let n = u.len() as f64;
        match self.basis {
            SpatialBasis::Uniform => {
                let q2: f64 = self.amplitudes.iter().map(|q| q * q).sum();
                let s2: f64 = u.iter().map(|&y| self.shape.eval(y).powi(2)).sum::<f64>() / n;
                q2 * tau * tau * s2
            }
            SpatialBasis::Fourier => {
                let s2: Vec<f64> = u.iter().map(|&y| self.shape.eval(y).powi(2)).collect();
                self.amplitudes
                    .iter()
                    .zip(&table.values)
                    .map(|(q, row)| {
                        q * q * tau * tau * row.iter().zip(&s2).map(|(e, s)| e * e * s).sum::<f64>() / n
                    })
                    .sum()
            }
        }
    }

    /// `⟨u, σ(t,u)ē_k⟩` for every mode.
    pub(crate) fn mode_projections(&self, table: &BasisTable, t: f64, u: &[f64], out: &mut [f64]) {
        let tau = self.time_factor(t);
        let n = u.len() as f64;
        match self.basis {
            SpatialBasis::Uniform => {
                let us: f64 = u.iter().map(|&y| y * self.shape.eval(y)).sum::<f64>() / n;
                for (o, q) in out.iter_mut().zip(&self.amplitudes) {
                    *o = q * tau * us;
                }
            }
            SpatialBasis::Fourier => {
                let us: Vec<f64> = u.iter().map(|&y| y * self.shape.eval(y)).collect();
                for ((o, q), row) in out.iter_mut().zip(&self.amplitudes).zip(&table.values) {
                    *o = q * tau * row.iter().zip(&us).map(|(e, s)| e * s).sum::<f64>() / n;
                }
            }
        }
    }
}

fn sup_on_unit_interval(f: &ScalarMap) -> f64 {
    (0..=1000)
        .map(|i| f.eval(i as f64 / 1000.0).abs())
        .fold(0.0, f64::max)
}

/// `Σ_k coeffs_k σ_k(t, u(·)) e_k`.
pub fn sigma_apply(spec: &NoiseSpec, t: f64, u: &PeriodicField, coeffs: &[f64]) -> Result<PeriodicField> {
    spec.apply(t, u, coeffs)
}

/// `Σ_k ‖σ(t,u)ē_k‖²_H`.
pub fn hs_norm_sq(spec: &NoiseSpec, t: f64, u: &PeriodicField) -> f64 {
    spec.hs_norm_sq(t, u)
}

/// The full data `(B, A, σ)` of one experiment.
#[derive(Debug, Clone)]
pub struct CoefficientSet {
    pub name: String,
    pub dim: usize,
    pub flux: FluxSpec,
    pub diffusion: DiffusionSpec,
    pub noise: NoiseSpec,
}

impl CoefficientSet {
    pub fn new(
        name: impl Into<String>,
        dim: usize,
        flux: FluxSpec,
        diffusion: DiffusionSpec,
        noise: NoiseSpec,
    ) -> Result<Self> {
        if !(1..=MAX_DIM).contains(&dim) {
            return Err(Error::InvalidGrid(format!("dimension {dim} not in {{1, 2}}")));
        }
        if dim == 1 && flux.direction[1] != 0.0 && !flux.is_zero() {
            return Err(Error::InvalidParameter {
                name: "flux",
                reason: "1-D flux must have a zero second component".into(),
            });
        }
        if !(diffusion.rho > 0.0) || diffusion.upper < diffusion.rho {
            return Err(Error::InvalidParameter {
                name: "diffusion",
                reason: format!(
                    "need 0 < rho <= upper (got rho = {}, upper = {})",
                    diffusion.rho, diffusion.upper
                ),
            });
        }
        Ok(Self {
            name: name.into(),
            dim,
            flux,
            diffusion,
            noise,
        })
    }

    /// Heat equation with no noise.
    pub fn linear_heat(dim: usize) -> Self {
        Self::new("linear-heat", dim, FluxSpec::zero(), DiffusionSpec::identity(), NoiseSpec::zero())
            .expect("valid")
    }

    pub fn with_noise(mut self, noise: NoiseSpec) -> Self {
        self.noise = noise;
        self
    }

    pub fn with_diffusion(mut self, diffusion: DiffusionSpec) -> Self {
        self.diffusion = diffusion;
        self
    }

    pub fn with_flux(mut self, flux: FluxSpec) -> Self {
        self.flux = flux;
        self
    }
}
