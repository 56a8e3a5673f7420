//! Configuration parsing and scenario runner behind the `ethsim` binary.

pub mod config;
pub mod runner;

pub use config::{parse_config, parse_raw, validate, ConfigError, Format, RunConfig, Scenario, ScenarioKind};
pub use runner::{execute, run, RunArtifacts, RunError, ScenarioOutput, Table};
