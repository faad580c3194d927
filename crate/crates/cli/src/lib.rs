//! Experiment runner behind the `diffeq` binary.

pub mod config;
pub mod output;
pub mod run;
pub mod suite;

pub use config::{ConfigError, ExperimentConfig};
pub use run::{exit_code, Ctx};
