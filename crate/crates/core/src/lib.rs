//! Meta sparse regression: recover the support shared by many few-sample
//! linear regression tasks from their pooled samples, then fit a novel task
//! with its coefficients restricted to that support.
//!
//! The crate also carries the multi-task baselines (group lasso and the
//! dirty model), seeded synthetic generators, a Monte-Carlo harness for
//! support-recovery phase curves, and an expression-table pipeline.

pub mod bench;
pub mod error;
pub mod io;
pub mod linalg;
pub mod meta;
pub mod model;
pub mod realdata;
pub mod rng;
pub mod solvers;
pub mod synth;

pub use error::{Error, Result};
pub use model::{
    extract_support, support_equal, GroundTruth, MetaDataset, SolverResult, SupportSet, TaskData,
};
pub use solvers::SolverOptions;
pub use synth::GenConfig;
