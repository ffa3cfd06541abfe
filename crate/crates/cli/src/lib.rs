//! Named experiments over the `ganlab` library: configuration files in,
//! CSV tables, SVG plots and a JSON manifest out.

pub mod acceptance;
pub mod config;
pub mod error;
pub mod experiments;
pub mod manifest;
pub mod output;
pub mod registry;
pub mod run;
pub mod svg;

pub use config::ExperimentConfig;
pub use error::{CliError, Result};
pub use manifest::{Check, RunManifest};
pub use run::run;

#[cfg(doctest)]
#[doc = include_str!("../../../book/src/experiments.md")]
mod book {}
