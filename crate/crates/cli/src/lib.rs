//! File formats, configuration, subcommands and the projector benchmark
//! behind the `eitomo` binary.

pub mod alloc;
pub mod array_file;
pub mod bench;
pub mod commands;
pub mod config;
pub mod error;

pub use error::{CliError, Result};
