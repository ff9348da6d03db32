//! Experiment runner for `sgd-walk-core`: configuration, named recipes, CSV
//! artifacts with a checksummed manifest, and SVG plots.

#![allow(clippy::neg_cmp_op_on_partial_ord, clippy::single_range_in_vec_init)]

pub mod artifacts;
pub mod config;
pub mod error;
pub mod output;
pub mod plot;
pub mod recipes;
pub mod seeds;

pub use config::ExperimentConfig;
pub use error::{Result, RunError};
pub use output::{verify_run, RunManifest};
pub use recipes::{run_experiment, Recipe, RecipeRegistry};
