//! Batch verification harness: builds models from a TOML configuration,
//! runs the inequality suites over a seeded sweep and renders reports.

pub mod config;
pub mod error;
pub mod report;
pub mod suites;
pub mod tools;

pub use config::{RunConfig, Suite};
pub use error::CliError;
pub use report::{report_render, Format, Report};
pub use suites::run;
