//! Scenario runner for `finepot`: declarative TOML configs in, JSON
//! reports and CSV/PGM dumps out.

pub mod config;
pub mod error;
pub mod gallery;
pub mod runner;
pub mod scene;

pub use config::{apply_override, Scenario, TaskKind, TaskSpec};
pub use error::CliError;
pub use runner::{run, RunOptions, RunReport};
