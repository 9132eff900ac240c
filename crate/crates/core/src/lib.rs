//! Adaptive locality preserving regression (ALPR).
//!
//! A supervised linear-regression classifier that jointly learns
//!
//! * a row-sparse projection `W` (m × C) whose row norms rank the input features,
//! * per-class neighbor graphs `S^i` whose weights adapt to distances in the projected space,
//! * a regression target `T` (n × C) constrained to a unit margin in favor of the true class.
//!
//! The three blocks are updated by alternating closed-form steps ([`solver::fit`]); the
//! fitted projection is then thresholded and used for nearest-neighbor classification in
//! the C-dimensional target space ([`classify`]).
//!
//! Features are stored column-per-sample (`X` is m × n) and class labels are `1..=C`
//! everywhere in the public API and in every file format.

pub mod baselines;
pub mod classify;
pub mod data;
pub mod error;
pub mod graph;
pub mod harness;
pub mod retarget;
pub mod solver;
pub mod synthetic;

pub use classify::{Classifier, PrunedModel};
pub use data::{one_hot, validate, Dataset, OneHotLabels, Projection, SolverConfig, TargetMatrix};
pub use error::{AlprError, Result};
pub use graph::ClassGraph;
pub use solver::{fit, FitResult};
