//! Command-line driver: meta-training, flat baselines, test-time adaptation,
//! sub-policy inspection and curve export.

pub mod commands;
pub mod error;
pub mod export;
pub mod presets;
pub mod settings;

pub use error::{CliError, Result};
