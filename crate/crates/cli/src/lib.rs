//! Configuration-driven scenario runner for the `radpair` library.

pub mod bornmarkov;
pub mod compare;
pub mod config;
pub mod error;
pub mod output;
pub mod run;
pub mod selftest;

pub use error::{CliError, Result};
