//! Library side of the `lyapsync` binary: config parsing, run manifests and
//! the subcommand implementations.

pub mod commands;
pub mod config;
pub mod manifest;
