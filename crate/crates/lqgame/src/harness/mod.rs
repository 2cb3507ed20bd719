//! Experiment plumbing: fixtures, presets, configs and the runner.

pub mod fixtures;
pub mod random;
pub mod config;
pub mod presets;
pub mod runner;
