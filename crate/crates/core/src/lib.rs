//! Desk-scale laboratory for pipeline-parallel optimization.
//!
//! * [`graph`]: computation graphs with forward passes and reverse-mode
//!   vector-Jacobian backward passes.
//! * [`objectives`]: benchmark objectives built as graphs, chain
//!   partitioning into pipeline stages, finite sums.
//! * [`pipeline`]: logical-time pipeline schedules (bubbling, sequential,
//!   GPipe-style ERM), validation, and a schedule-driven gradient executor.
//! * [`smoothing`]: Gaussian randomized smoothing estimators and the sampled
//!   Clarke r-subdifferential.
//! * [`optim`]: PPRS and the sequential GD / Nesterov baselines, reporting
//!   loss against simulated pipeline time.
//! * [`experiment`]: config-driven experiment grids, CSV output and plots.

// `!(x > 0.0)` is used on purpose: it also rejects NaN
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod error;
pub mod experiment;
pub mod graph;
pub mod linalg;
pub mod objectives;
pub mod optim;
pub mod pipeline;
pub mod smoothing;

pub use error::{Error, Result};
