//! File formats, run orchestration and the command-line front end for
//! [`uavchan_core`].
//!
//! * [`dataset`]: link datasets as CSV, plus condition lists for generation.
//! * [`model`]: versioned JSON model files.
//! * [`config`]: the JSON run configuration.
//! * [`run`]: the commands behind the `uavchan` binary, with manifests that
//!   make every run replayable.

pub mod config;
pub mod dataset;
mod error;
pub mod model;
pub mod run;

pub use error::{Error, Result};
pub use uavchan_core as core;
