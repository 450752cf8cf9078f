//! Shared fixtures for the kernel benchmarks.

use std::collections::BTreeMap;
use std::f64::consts::PI;

use smalltime_core::coefficients::build_set;
use smalltime_core::{CoefficientSet, PeriodicField, TorusGrid};

/// A named preset with its default parameters on `dim` dimensions.
pub fn preset(name: &str, dim: usize) -> CoefficientSet {
    let params = BTreeMap::from([("dim".to_string(), dim.to_string())]);
    build_set(name, &params).expect("preset builds")
}

/// Smooth multi-mode field on an `n`-point-per-axis grid.
pub fn smooth_field(dim: usize, n: usize) -> PeriodicField {
    let grid = TorusGrid::new(dim, n).expect("valid grid");
    grid.sample(|x| (2.0 * PI * x[0]).sin() + 0.3 * (4.0 * PI * (x[0] + x[1])).cos())
}

/// Deterministic pseudo-increments of size `√dt` for `k` modes.
pub fn increments(k: usize, dt: f64) -> Vec<f64> {
    (0..k).map(|i| dt.sqrt() * ((i as f64 * 1.7).sin())).collect()
}
