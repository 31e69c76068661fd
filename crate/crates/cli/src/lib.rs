//! Configuration-driven runner for the adiv-core experiments. Every command
//! produces a JSON report of named measurements against thresholds.

pub mod config;
pub mod error;
pub mod presets;
pub mod report;
pub mod runner;

pub use config::RunConfig;
pub use error::RunError;
pub use presets::{find_preset, list_presets, Preset};
pub use report::{Row, RunReport};
pub use runner::{run, Command};
