//! Command-line front end: run configurations, experiment dispatch and
//! artifact writing.

pub mod commands;
pub mod config;

pub use commands::{execute, run, validate, EXIT_CONFIG, EXIT_GATE, EXIT_PASS};
pub use config::{load, parse, resolve, Experiment, Plan, SimConfig};
