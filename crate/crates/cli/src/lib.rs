//! Command-line front end: CSV ingestion, simulation campaigns, selection
//! runs on observed data, and result documents.

pub mod args;
pub mod config;
pub mod error;
pub mod ingest;
pub mod report;
pub mod run;

pub use config::RunConfig;
pub use error::CliError;
pub use run::{run, RunOutput};

#[cfg(doctest)]
#[doc = include_str!("../../../book/src/cli.md")]
struct Guide;
