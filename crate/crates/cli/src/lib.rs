//! Experiment front end for the `swirhc` library: presets, a TOML config
//! schema, an artifact-writing runner, and summary comparison.

pub mod config;
pub mod runner;
