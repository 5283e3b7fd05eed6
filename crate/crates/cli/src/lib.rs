//! Frame I/O, configuration files, overlays, the batch CLI and the local
//! HTTP session service around the `activecircle` engine.

pub mod cli;
pub mod config;
pub mod error;
pub mod io;
pub mod overlay;
pub mod pipeline;
pub mod service;

pub use cli::{run_cli, run_cli_with};
pub use error::{CliError, Result};
