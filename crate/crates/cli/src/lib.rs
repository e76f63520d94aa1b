//! Command-line driver for continest: network generation, influence
//! estimation, greedy maximization, cascade evaluation and benchmarks.

// `!(x >= 0.0)` is used on purpose: it also rejects NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod args;
pub mod bench;
pub mod commands;
pub mod error;
pub mod manifest;
pub mod output;

pub use args::Cli;
pub use commands::{run, run_from_args};
pub use error::{CliError, CliResult};
