//! Selective inference for feature-selection pipelines.
//!
//! A pipeline is a DAG of missing-value imputation, outlier detection and
//! feature selection components. Running it on a response vector yields a set
//! of outliers `O` and selected features `M`. This crate computes p-values for
//! the least-squares coefficients of the selected features that are valid
//! *conditionally* on `(M, O)`: the response is restricted to a line
//! `a + b z` through the observed data, the set of `z` reproducing the observed
//! selection is traced by a parametric line search, and the test statistic is
//! referred to a normal law truncated to that set.
//!
//! The crate is `no_std` (it needs `alloc`). Data ingestion, config files and
//! the simulation harness live in the companion `sipipe` crate.

#![no_std]

extern crate alloc;

#[cfg(test)]
extern crate std;

pub mod components;
pub mod cv;
pub mod dataset;
pub mod error;
pub mod events;
pub mod graph;
pub mod inference;
pub mod interval;
pub mod linalg;
mod math;
pub mod normal;
pub mod search;

pub use dataset::{estimate_variance, GaussianModel, MaskedDataset};
pub use error::{Error, Result};
pub use graph::{CombineOp, CombineTarget, ComponentKind, FsMethod, MviMethod, Node, OdMethod, PipelineGraph};
pub use interval::{solve_quadratic_inequality, Interval, IntervalSet};
pub use linalg::Matrix;
