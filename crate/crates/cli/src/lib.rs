//! Batch driver for convergence studies: configuration, the solve/measure
//! pipeline and CSV output.

pub mod args;
pub mod config;
pub mod output;
pub mod study;

pub use config::{ProblemConfig, StudyConfig, TimingConfig};
pub use study::{compute_study, emit_timing, run_single, run_study, StudyOutcome};
