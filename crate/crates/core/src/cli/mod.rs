//! Command-line pipeline: configuration, masks, metrics, parameter files and subcommands.

mod args;
pub mod commands;
pub mod config;
pub mod mask;
pub mod metrics;
pub mod params_io;
pub mod synthetic;

pub use args::{run, Cli, Command, ConfigArgs};
