//! Scenario files, command dispatch and result export for the `evi-plast` binary.

pub mod commands;
pub mod config;
pub mod export;
pub mod scenario;

pub use commands::{run, Command, Report, RunError, RunOptions};
pub use config::{load_scenario, parse_scenario, ScenarioConfig};
pub use scenario::Scenario;
