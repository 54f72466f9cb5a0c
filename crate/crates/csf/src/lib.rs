//! File formats, checkpoints, run manifests and the `csf` command line
//! around [`csf_core`].

pub mod checkpoint;
pub mod cli;
pub mod commands;
pub mod error;
pub mod io;
pub mod manifest;
pub mod run;
pub mod svg;
pub mod workflow;

pub use error::{CliError, Result};
