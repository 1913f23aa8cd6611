//! Batch scenario interface: configuration parsing, subcommand runners, and
//! CSV/SVG emission. The `turbkd` binary is a thin argument parser over
//! [`runner::run`].

pub mod config;
pub mod output;
pub mod runner;

pub use config::ScenarioConfig;
pub use runner::{run, RunOutcome, Subcommand};
