//! Batch driver for balmet-core: configuration, matrix files and jobs.

pub mod config;
pub mod error;
pub mod jobs;
pub mod matrix_io;

pub use config::{Overrides, RunConfig};
pub use error::CliError;
