//! Experiment front end: configuration, ensemble orchestration, filter
//! benchmarks and figure rendering.

pub mod bench;
pub mod config;
pub mod experiment;
pub mod plot;
