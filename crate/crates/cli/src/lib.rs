//! Configuration parsing and scenario dispatch for the `mixbgk` binary.

pub mod config;
pub mod dispatch;

pub use config::{parse_config, ConfigError, RunConfig, Scenario};
pub use dispatch::{dispatch, DispatchOptions, Report, RunError};
