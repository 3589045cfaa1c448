//! File formats, checkpoints and the `kenn` command-line tool built on
//! `kenn-core`.

pub mod checkpoint;
pub mod cli;
pub mod commands;
pub mod error;
pub mod io;

pub use error::{CliError, Result};
