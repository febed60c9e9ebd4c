//! Command implementations behind the `styleshift` binary.

pub mod commands;
pub mod config;
pub mod plot;

pub use commands::{exit_code, TrainKind};
pub use config::{Profile, RunConfig};
