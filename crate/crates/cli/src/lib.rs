//! Operational surface of the scheduler: configuration, trained snapshots,
//! the HTTP service and the `metainf` command line.

pub mod commands;
pub mod config;
pub mod error;
pub mod service;
pub mod snapshot;

pub use config::AppConfig;
pub use error::{CliError, CliResult};
pub use snapshot::Snapshot;
