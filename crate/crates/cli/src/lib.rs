//! Command-line front end for the preictal detection pipeline:
//! config-file plus flag handling and the subcommand implementations.

pub mod commands;
pub mod config;
