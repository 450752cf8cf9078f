//! Ordered path-parallel maps. Results come back in path order, so every
//! reduction downstream is independent of the worker count.

use rayon::prelude::*;

use crate::coefficients::CoefficientSet;
use crate::error::Result;
use crate::noise::{sample_path, NoisePath, RngStreamKey, StreamRole};

/// Run `f` for every path index in `0..n_paths` on the current rayon pool.
pub fn map_paths<T, F>(n_paths: usize, f: F) -> Result<Vec<T>>
where
    T: Send,
    F: Fn(usize) -> Result<T> + Sync + Send,
{
    (0..n_paths).into_par_iter().map(f).collect()
}

/// The driving path of path `index` for `set` on `n_steps` unit-horizon steps.
pub fn path_noise(set: &CoefficientSet, seed: u64, index: usize, role: StreamRole, n_steps: usize) -> Result<NoisePath> {
    if set.noise.is_zero() {
        return Ok(NoisePath::zeros(set.noise.n_modes(), n_steps));
    }
    sample_path(
        RngStreamKey::new(seed, index as u64, role),
        set.noise.n_modes(),
        n_steps,
        1.0 / n_steps as f64,
    )
}
