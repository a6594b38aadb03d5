//! Command-line front end: configuration, figure presets, output writers and
//! the validation suite.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod commands;
pub mod config;
pub mod error;
pub mod eval;
pub mod figure;
pub mod output;
pub mod validate;

pub use config::{Quantity, Settings};
pub use error::CliError;
pub use figure::{preset, run_figure, Figure};
pub use validate::{validate, Report};

pub const VERSION: &str = env!("CARGO_PKG_VERSION");
