//! Command-line front end: configuration, subcommands and report rendering.

pub mod commands;
pub mod config;
pub mod report;
