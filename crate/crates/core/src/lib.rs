//! Pseudo-spectral simulation of quasilinear parabolic SPDEs on the torus,
//! with Monte Carlo tools for small-time tail estimates and a discrete rate
//! function.

// `!(x > 0.0)` is the NaN-rejecting form used throughout the validators.
#![allow(clippy::neg_cmp_op_on_partial_ord, clippy::needless_range_loop, clippy::too_many_arguments)]

pub mod coefficients;
pub mod ensemble;
pub mod error;
pub mod estimates;
pub mod field;
pub mod heat;
pub mod ldp;
pub mod noise;
pub mod rate;
pub mod solver;
pub mod stats;

pub use coefficients::{CoefficientSet, DiffusionSpec, FluxSpec, NoiseSpec, ScalarMap, SpatialBasis};
pub use error::{Error, Result};
pub use field::{MatrixField, PeriodicField, Spectrum, TorusGrid, VectorField};
pub use noise::{NoisePath, RngStreamKey, SeedProvenance, StreamRole};
pub use solver::{Scheme, SolverConfig, StepDiagnostics, Trajectory};
pub use estimates::{EnergyRecord, H1Convention, MollifierParams};
pub use ldp::{LdpScanResult, McOptions, ScanRow, TailKind, TailQuery};
pub use rate::{ControlPath, PathCandidate, RateEvaluation};
