//! Backtesting companion for the sleeping-experts aggregation library:
//! dataset files, run configuration, backtest orchestration, report
//! rendering, and synthetic stream generation.
//!
//! The `sleet` binary wraps these modules; they are exposed as a library so
//! integration tests (and other tools) can drive the same code paths.

pub mod backtest;
pub mod config;
pub mod dataset_io;
pub mod error;
pub mod report;
pub mod synth;

pub use backtest::{run_backtest, RunOutcome};
pub use config::{RawConfig, RunConfig};
pub use error::{CliError, Result};
