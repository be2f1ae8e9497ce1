//! Experiment harness around `m3s_core`: config files, dataset CSVs,
//! checkpoints, result reports and the `m3s` command line.

pub mod checkpoint;
pub mod cli;
pub mod config;
pub mod dataset_io;
pub mod error;
pub mod experiment;
pub mod output;
pub mod report;

pub use cli::{run, Cli, Command};
pub use error::{HarnessError, Result};
