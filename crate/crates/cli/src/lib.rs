//! Command-line front end: JSON run configs in, JSON run reports and CSV
//! plot data out.
//!
//! Exit codes: 0 certified or success, 2 inconclusive, 3 invalid input or
//! infeasible parameters.

pub mod commands;
pub mod config;
pub mod report;

pub use config::RunConfig;
pub use report::{CliError, RunReport, EXIT_CERTIFIED, EXIT_INCONCLUSIVE, EXIT_INVALID};
