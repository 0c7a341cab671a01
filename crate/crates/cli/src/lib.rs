//! Batch front end for the channel FSI solver: JSON configuration,
//! scenario execution with provenance-stamped artifacts, scenario
//! descriptions and result comparison.

pub mod artifacts;
pub mod compare;
pub mod config;
pub mod error;
pub mod registry;
pub mod run;

pub use compare::{compare_dirs, CompareReport};
pub use config::RunConfig;
pub use error::CliError;
pub use registry::{describe, Scenario};
pub use run::execute;
