//! Batch front end: experiment configs, orchestration and the acceptance suite.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod accept;
pub mod config;
pub mod run;

pub use accept::{accept, CriterionRow};
pub use config::{Command, ExperimentConfig, Suite};
pub use run::{run, Failure, FailureKind, RunSummary};
