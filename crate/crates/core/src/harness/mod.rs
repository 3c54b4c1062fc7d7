//! Config-driven experiment runner.
//!
//! [`config::validate_config`] turns a TOML document into a fully defaulted
//! [`config::ExperimentConfig`]; [`experiments::run_experiment`] produces a
//! [`report::RunReport`] whose tables mirror the published figures and
//! tables this simulator reproduces.

pub mod config;
pub mod experiments;
pub mod report;

pub use config::{validate_config, Experiment, ExperimentConfig};
pub use experiments::run_experiment;
pub use report::{RunReport, Table};
