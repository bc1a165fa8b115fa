//! Command-line surface for draping, training, evaluation, gradient
//! checks, benchmarks and mesh generation.

pub mod commands;
pub mod config;
pub mod error;
pub mod report;

pub use error::{CliError, Result};
