//! Instrumented GD/SGD training of small classifiers.
//!
//! A training run records every iterate and update direction; the analysis
//! modules then probe the loss along each update segment ([`walk`]), reduce
//! slices and trajectories to scalar diagnostics ([`metrics`]), measure
//! curvature ([`curvature`]), and compare against exact GD on quadratics
//! ([`quadlab`]).

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod curvature;
pub mod data;
pub mod error;
pub mod metrics;
pub mod net;
pub mod objective;
pub mod optim;
pub mod params;
pub mod quadlab;
pub mod reduce;
pub mod walk;

pub use error::{Error, Result};
pub use params::ParamVector;
