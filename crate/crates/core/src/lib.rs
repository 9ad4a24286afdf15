//! A regression-testing robot.
//!
//! Test programs are declared in per-directory `OvalFile`s. The robot
//! builds them through a pluggable build tool, runs them under the
//! declared runtime conditions, and compares selected lines and numbers of
//! their output with a validated reference, writing everything to
//! sectioned `<program>.log` files.

pub mod adapters;
pub mod cli;
pub mod config;
pub mod diff;
pub mod error;
pub mod executor;
pub mod logfile;
pub mod site;

pub use error::{OvalError, Result};
