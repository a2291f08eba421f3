//! File formats, configuration, parallel execution and the `windfuse`
//! command line on top of `windfuse-core`.

pub mod artifact;
pub mod cli;
pub mod config;
pub mod error;
pub mod exec;
pub mod io;
pub mod time;

pub use error::{Error, Result};
