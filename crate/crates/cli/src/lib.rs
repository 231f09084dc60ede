//! Command-line front end for `helium-gl-core`: TOML configuration,
//! snapshot and CSV formats, and the subcommands.

pub mod config;
pub mod output;
pub mod run;
pub mod snapshot;
