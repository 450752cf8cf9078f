//! Truncated cylindrical Wiener increments with reproducible per-path streams.
//!
//! Every `(master_seed, role)` pair seeds a ChaCha8 generator; the stream id
//! packs `(path_index, mode)`, so each mode of each path owns an independent
//! counter-addressed stream and paths can be generated in any order.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum StreamRole {
    Dynamics,
    Validation,
    Calibration,
}

impl StreamRole {
    fn tag(self) -> u64 {
        match self {
            Self::Dynamics => 0x6479_6e61,
            Self::Validation => 0x7661_6c69,
            Self::Calibration => 0x6361_6c69,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct RngStreamKey {
    pub master_seed: u64,
    pub path_index: u64,
    pub role: StreamRole,
}

impl RngStreamKey {
    pub fn new(master_seed: u64, path_index: u64, role: StreamRole) -> Self {
        Self {
            master_seed,
            path_index,
            role,
        }
    }

    pub fn dynamics(master_seed: u64, path_index: u64) -> Self {
        Self::new(master_seed, path_index, StreamRole::Dynamics)
    }

    fn rng(&self, domain: u64, mode: usize) -> ChaCha8Rng {
        let mut seed = [0u8; 32];
        seed[..8].copy_from_slice(&self.master_seed.to_le_bytes());
        seed[8..16].copy_from_slice(&self.role.tag().to_le_bytes());
        seed[16..24].copy_from_slice(&domain.to_le_bytes());
        let mut rng = ChaCha8Rng::from_seed(seed);
        assert!(mode < 1 << 16 && self.path_index < 1 << 48, "stream id overflow");
        rng.set_stream((self.path_index << 16) | mode as u64);
        rng
    }
}

/// Where a path came from; enough to regenerate it bit for bit.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SeedProvenance {
    pub key: RngStreamKey,
    /// Refinement factors applied after sampling, in order.
    pub refinements: Vec<usize>,
}

/// `K × n_steps` Gaussian increments, stored step-major (`[step * K + mode]`).
#[derive(Debug, Clone, PartialEq)]
pub struct NoisePath {
    n_modes: usize,
    n_steps: usize,
    dt: f64,
    increments: Vec<f64>,
    provenance: SeedProvenance,
}

const DOMAIN_SAMPLE: u64 = 0;

impl NoisePath {
    pub fn n_modes(&self) -> usize {
        self.n_modes
    }

    pub fn n_steps(&self) -> usize {
        self.n_steps
    }

    pub fn dt(&self) -> f64 {
        self.dt
    }

    pub fn provenance(&self) -> &SeedProvenance {
        &self.provenance
    }

    /// Increments of all modes over step `step`.
    #[inline]
    pub fn step(&self, step: usize) -> &[f64] {
        &self.increments[step * self.n_modes..(step + 1) * self.n_modes]
    }

    pub fn increment(&self, mode: usize, step: usize) -> f64 {
        self.increments[step * self.n_modes + mode]
    }

    pub fn mode_series(&self, mode: usize) -> Vec<f64> {
        (0..self.n_steps).map(|s| self.increment(mode, s)).collect()
    }

    /// `W_k(1)` for every mode (sum of increments).
    pub fn endpoint(&self) -> Vec<f64> {
        (0..self.n_modes).map(|k| self.mode_series(k).iter().sum()).collect()
    }

    /// Pure zero path, for deterministic runs.
    pub fn zeros(n_modes: usize, n_steps: usize) -> Self {
        Self {
            n_modes,
            n_steps,
            dt: 1.0 / n_steps as f64,
            increments: vec![0.0; n_modes * n_steps],
            provenance: SeedProvenance {
                key: RngStreamKey::dynamics(0, 0),
                refinements: Vec::new(),
            },
        }
    }

    /// Scale every increment; used to build deterministic or amplified drivers.
    pub fn scaled(&self, s: f64) -> Self {
        let mut p = self.clone();
        p.increments.iter_mut().for_each(|x| *x *= s);
        p
    }
}

/// Dyadic grid for increments of a step of size `dt`: `2^(⌈log2 √dt⌉ − 40)`.
///
/// Increments are rounded to this grid (a relative perturbation near 1e-12 of
/// one standard deviation). Finer grids divide coarser ones, so sums of
/// refined pieces are exact in floating point regardless of order.
pub fn quantum(dt: f64) -> f64 {
    2f64.powi(dt.sqrt().log2().ceil() as i32 - 40)
}

fn quantize(x: f64, q: f64) -> f64 {
    (x / q).round() * q
}

/// Draw i.i.d. `N(0, dt)` increments for `K` modes.
pub fn sample_path(key: RngStreamKey, n_modes: usize, n_steps: usize, dt: f64) -> Result<NoisePath> {
    if !(dt > 0.0) || !dt.is_finite() {
        return Err(Error::InvalidParameter {
            name: "dt",
            reason: format!("must be positive (got {dt})"),
        });
    }
    if n_modes == 0 || n_steps == 0 {
        return Err(Error::InvalidParameter {
            name: "n_steps",
            reason: "need at least one mode and one step".into(),
        });
    }
    let sd = dt.sqrt();
    let q = quantum(dt);
    let mut increments = vec![0.0; n_modes * n_steps];
    for mode in 0..n_modes {
        let mut rng = key.rng(DOMAIN_SAMPLE, mode);
        for step in 0..n_steps {
            let z: f64 = StandardNormal.sample(&mut rng);
            increments[step * n_modes + mode] = quantize(sd * z, q);
        }
    }
    Ok(NoisePath {
        n_modes,
        n_steps,
        dt,
        increments,
        provenance: SeedProvenance {
            key,
            refinements: Vec::new(),
        },
    })
}

/// Regenerate a path from its provenance.
pub fn regenerate(prov: &SeedProvenance, n_modes: usize, n_steps_coarse: usize, dt_coarse: f64) -> Result<NoisePath> {
    let mut p = sample_path(prov.key, n_modes, n_steps_coarse, dt_coarse)?;
    for &f in &prov.refinements {
        p = refine_path(&p, f)?;
    }
    Ok(p)
}

/// Split every increment into `factor` Brownian-bridge pieces whose
/// left-to-right floating-point sum equals the original increment exactly.
pub fn refine_path(path: &NoisePath, factor: usize) -> Result<NoisePath> {
    if factor < 2 {
        return Err(Error::InvalidParameter {
            name: "factor",
            reason: format!("refinement factor must be >= 2 (got {factor})"),
        });
    }
    let k = path.n_modes;
    let fine_steps = path.n_steps * factor;
    let fine_dt = path.dt / factor as f64;
    let mut increments = vec![0.0; k * fine_steps];
    // the refinement lineage selects a fresh domain so refinements of refinements stay independent
    let domain = 1 + path
        .provenance
        .refinements
        .iter()
        .fold(0u64, |acc, &f| acc.wrapping_mul(1_000_003).wrapping_add(f as u64));
    let domain = domain.wrapping_mul(31).wrapping_add(factor as u64);
    for mode in 0..k {
        let mut rng = path.provenance.key.rng(domain, mode);
        for step in 0..path.n_steps {
            let total = path.increment(mode, step);
            let pieces = bridge_split(&mut rng, total, factor, fine_dt)
                .ok_or(Error::RefinementFailed { mode, step })?;
            for (j, v) in pieces.into_iter().enumerate() {
                increments[(step * factor + j) * k + mode] = v;
            }
        }
    }
    let mut provenance = path.provenance.clone();
    provenance.refinements.push(factor);
    Ok(NoisePath {
        n_modes: k,
        n_steps: fine_steps,
        dt: fine_dt,
        increments,
        provenance,
    })
}

fn bridge_split(rng: &mut ChaCha8Rng, total: f64, factor: usize, fine_dt: f64) -> Option<Vec<f64>> {
    let mut pieces = Vec::with_capacity(factor);
    let mut partial = 0.0;
    for j in 0..factor - 1 {
        let left = (factor - j) as f64;
        let remaining = total - partial;
        // conditional law of the next piece given the remaining sum over `left` pieces
        let mean = remaining / left;
        let var = fine_dt * (left - 1.0) / left;
        let z: f64 = StandardNormal.sample(rng);
        let piece = quantize(mean + var.sqrt() * z, quantum(fine_dt));
        pieces.push(piece);
        partial += piece;
    }
    let last = total - partial;
    pieces.push(last);
    let check = pieces.iter().fold(0.0, |acc, p| acc + p);
    (check == total).then_some(pieces)
}
