//! Batch driver for FIGR: configuration, checkpoints and the `figr`
//! subcommands.
//!
//! - [`config`]: flat `key = value` run configuration and its fingerprint
//! - [`checkpoint`]: FIGR checkpoint files
//! - [`train`], [`generate`], [`evaluate`], [`pack`], [`gradcheck`]: commands

pub mod checkpoint;
pub mod config;
pub mod dataset;
pub mod evaluate;
pub mod generate;
pub mod gradcheck;
pub mod pack;
pub mod train;

pub use checkpoint::Checkpoint;
pub use config::RunConfig;
