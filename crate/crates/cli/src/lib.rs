//! Batch front-end for the `heis` tool: configuration, subcommands and reports.

pub mod calibration;
pub mod commands;
pub mod config;
pub mod report;
pub mod symbol_spec;
