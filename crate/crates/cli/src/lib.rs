//! Configuration, persistence and the verification harness behind `rgpt`.

pub mod acceptance;
pub mod commands;
pub mod config;
pub mod crosscheck;
pub mod error;
pub mod output;

pub use config::RunConfig;
pub use error::{CliError, Result};
