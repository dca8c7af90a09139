//! Experiment drivers behind the `ddl` binary.

pub mod config;
pub mod error;
pub mod experiments;
pub mod validate;

pub use config::{Config, Overrides};
pub use error::{CliError, Result};
