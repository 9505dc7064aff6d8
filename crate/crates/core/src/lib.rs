//! Coupled BCOS solver for scalar forward-backward SDEs.
//!
//! The forward SDE is discretised by a second-order Taylor scheme
//! (Euler, Milstein or simplified order 2.0 weak Taylor) decoupled through the
//! cosine expansions of the previous time level; the backward SDE follows the
//! generalised theta-scheme with conditional expectations evaluated by the COS
//! method from closed-form characteristic functions.

pub mod cosine;
pub mod error;
pub mod metrics;
pub mod problem;
pub mod reference;
pub mod solver;
pub mod transition;

pub use cosine::{dct2, CosineSeries, Jet, SpatialGrid};
pub use error::{BcosError, Result};
pub use metrics::{fit_slope, strong_errors, weak_errors_t0, ErrorReport, StrongErrors, WeakErrors};
pub use problem::{DerivativeTier, FbsdeProblem, LqParams, State};
pub use solver::{solve, BcosSolution, DecouplingField, SolverOptions, ThetaParams};
pub use transition::{build_table, SchemeKind, TransitionTable};
