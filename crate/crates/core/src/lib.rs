//! Conditional probability estimation with the V-matrix method, posed as a
//! constrained quadratic program over RKHS expansion coefficients, together
//! with the diagnostics that explain when it breaks: Gram spectra, KKT pivot
//! breakdown and range-space feasibility of the constraint system.
//!
//! Pipeline: [`datasets`] → [`kernels::gram`] → [`qp::assemble`] →
//! [`feasibility::analyze`] and [`solver::solve`] → [`estimator::Model`].
//! [`experiment`] wires the whole thing into reproducible JSON reports.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod datasets;
pub mod error;
pub mod estimator;
pub mod experiment;
pub mod feasibility;
pub mod kernels;
pub mod numerics;
pub mod parallel;
pub mod qp;
mod serde_ext;
pub mod solver;

pub use error::{Error, Result};
pub use parallel::Execution;
