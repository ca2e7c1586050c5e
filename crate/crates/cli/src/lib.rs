//! Configuration-driven experiment runner.

pub mod baseline;
pub mod checks;
pub mod config;
pub mod play;
pub mod rebel;
pub mod report;

pub use config::{ConfigError, ExperimentConfig, Resolved};

/// Process exit codes.
pub mod exit {
    pub const SUCCESS: i32 = 0;
    pub const CHECK_FAILED: i32 = 1;
    pub const CONFIG_ERROR: i32 = 2;
}
