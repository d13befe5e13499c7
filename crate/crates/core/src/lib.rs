//! Learning linear inequality constraints from feasible points.
//!
//! A small Equation-Learner (EQL) network with identity and constant
//! primitives is trained against a three-term directional loss so that its
//! zero level set hugs one side of the data. The trained network collapses to
//! an affine form, which is read off as a canonical [`LinearConstraint`] and
//! scored by the share of points it cuts off.
//!
//! The pipeline is:
//!
//! 1. [`datagen`] samples points uniformly from a region (or load a CSV with
//!    [`datamodel::load_dataset`]);
//! 2. [`trainer::train`] / [`trainer::train_multi`] fit the network using
//!    [`loss::loss_total`] and its analytic gradient;
//! 3. [`extract::extract_constraint`] and [`extract::violation_rate`] turn
//!    the network into an inequality and score it.
//!
//! Data-parallel loops (batch evaluation, gradient accumulation, violation
//! counting, independent training runs) go through [`par`], which uses rayon
//! when the `parallel` feature is enabled and plain iterators otherwise. Both
//! backends produce bit-identical results.

pub mod cli;
pub mod datagen;
pub mod datamodel;
pub mod extract;
pub mod loss;
pub mod network;
pub mod par;
pub mod trainer;

pub use datagen::{generate, paper_dataset, Preset, RegionSpec};
pub use datamodel::{
    DataError, Dataset, Direction, EpochRecord, LinearConstraint, LossConfig, PercentileSide,
    TrainConfig, TrainReport,
};
pub use extract::{extract_constraint, prune, violation_rate, ViolationReport};
pub use loss::{loss_total, LossBreakdown};
pub use network::{EqlNetwork, Primitive};
pub use par::Backend;
pub use trainer::{gradients, train, train_multi, train_runs, Gradients, TrainError};
