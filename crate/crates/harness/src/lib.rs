//! Reproducible experiment runner for the robust-sensing estimators.

pub mod config;
pub mod error;
pub mod experiments;
pub mod table;

pub use config::ExperimentConfig;
pub use error::{HarnessError, Result};
pub use table::ResultTable;
