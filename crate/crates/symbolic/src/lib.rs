//! Exact symbolic derivation of the second-order flow map.

pub mod calculus;
pub mod field;
pub mod flow_table;
pub mod poly;
pub mod error;
pub mod loc;

pub use error::{Result, SymError};
