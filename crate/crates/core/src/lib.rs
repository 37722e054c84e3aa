//! Hybrid quantum-classical binary classifiers.
//!
//! The crate bundles an exact statevector simulator for few-qubit circuits,
//! parameter-shift gradients, a small dense network stack, the quantum and
//! hybrid classifier architectures built on top of them, classical baselines,
//! and the experiment harness used to benchmark all of them against noisy
//! synthetic datasets.
//!
//! Data-parallel loops (per-sample gradients, dataset scoring, prediction
//! grids, forest training, sweep cells) go through [`exec::Execution`]. With
//! the default `parallel` feature they run on rayon; without it, or with
//! [`exec::Execution::Sequential`], they run in a plain loop. Both paths
//! produce bitwise-identical results.

pub mod baselines;
pub mod data;
pub mod error;
pub mod exec;
pub mod experiment;
pub mod grad;
mod io;
pub mod metrics;
pub mod model;
pub mod nn;
pub mod sim;
pub mod train;

pub use error::{Error, Result};
pub use exec::Execution;
