//! Experiment harness around `finsler-core`: configuration files, ℓ-ladders over
//! cylinder lengths, CSV output and the `finsler-lab` command line.

pub mod cli;
pub mod config;
pub mod error;
pub mod experiments;
pub mod output;

pub use config::{Config, ExperimentKind, Load};
pub use error::{Error, Result};
pub use experiments::{Check, FitSummary, Ladder};
