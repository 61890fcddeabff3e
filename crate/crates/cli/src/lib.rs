//! Command-line front end: dataset/component IO, run manifests, and the
//! experiment harness.

pub mod commands;
pub mod io;
pub mod manifest;

pub use commands::{run, Cli};
