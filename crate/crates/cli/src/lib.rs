//! Configuration-driven experiment runner: reference solutions, interface
//! and mesh sweeps, adaptive runs. Writes CSV, mesh and VTK files.

pub mod config;
pub mod run;

pub use config::{load_config, parse_config, ConfigError, ExperimentConfig, RunKind};
pub use run::{run, RunOptions, RunOutcome};
