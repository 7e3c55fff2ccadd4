//! Pipeline wiring behind the `tofmpi` binary.

pub mod commands;
pub mod config;
mod error;
pub mod manifest;
pub mod pipeline;

pub use error::{CliError, Result};
