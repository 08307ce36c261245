//! Config-driven experiment runner on top of [`skewlab_core`].
//!
//! - [`config`]: the line-based experiment format, parsing, validation and
//!   canonical serialization.
//! - [`runner`]: the `exponent`, `bunching`, `holonomy`, `criterion` and
//!   `sweep` commands, CSV output and exit codes.

pub mod config;
pub mod runner;

pub use config::{ConfigError, ExperimentConfig};
pub use runner::{run_command, Command, Outcome, RunError};
