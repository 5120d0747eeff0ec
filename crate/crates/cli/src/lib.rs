//! Library side of the `dalloc` command-line tool.
//!
//! Every subcommand is a function that reads its inputs, writes its outputs
//! into a directory, and returns the [`RunManifest`] it wrote alongside them.

pub mod commands;
pub mod config;
pub mod error;
pub mod manifest;
pub mod report;
pub mod svg;

pub use commands::{allocate, gen_data, replay, report, simulate, train_embeddings, with_workers};
pub use config::{Overrides, RunConfig};
pub use error::{CliError, Result, EXIT_OK, EXIT_RUNTIME, EXIT_VALIDATION};
pub use manifest::RunManifest;
