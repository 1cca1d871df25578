//! Library side of the cracklab command line: configuration, pipelines,
//! manifests, and the acceptance suite shared between `cracklab verify` and
//! the integration tests.

pub mod acceptance;
pub mod config;
pub mod manifest;
pub mod pipeline;

pub use config::RunConfig;
pub use pipeline::{run, Subcommand};
