//! Batch driver for the nematic flow solver: configuration, checkpoints and
//! run orchestration behind the `lcdflow` binary.

pub mod checkpoint;
pub mod config;
pub mod runner;

pub use checkpoint::{load_checkpoint, save_checkpoint, CheckpointError};
pub use config::{parse_config, Backend, ConfigError, RunConfig};
pub use runner::{run_command, RunError, Summary};
