//! Batch front-end: configuration, trajectory CSVs, the JSON run report and
//! SVG plots.

pub mod config;
pub mod csv;
pub mod run;
pub mod svg;

pub use config::{ConfigError, ProblemConfig, RunConfig};
pub use run::{run, RunError, RunOptions, RunReport};
