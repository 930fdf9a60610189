//! Command-line front end for the `stochwave` library.

pub mod config;
pub mod run;

pub use config::{parse_args, Cli, Command};
pub use run::{execute, render, Rendered};
