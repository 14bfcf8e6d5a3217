//! Command-line driver for `semiquant` experiments: TOML configs, named
//! checks, CSV reports and an on-disk eigendecomposition cache.

pub mod app;
pub mod cache;
pub mod checks;
pub mod config;
pub mod report;
pub mod run;
