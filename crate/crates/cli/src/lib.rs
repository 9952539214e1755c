//! Configuration parsing, command dispatch and result emission for the `npbayes` binary.

pub mod commands;
pub mod config;
pub mod output;
pub mod params;

pub use commands::run;
pub use config::{parse_config, CliError, Command, ErrorKind, Format, RunConfig};
pub use output::{Cell, Report, Table};
