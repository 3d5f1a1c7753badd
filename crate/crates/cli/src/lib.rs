//! Configuration, artifact handling and stage orchestration behind the
//! `divergent` command.

pub mod artifacts;
pub mod config;
pub mod pipeline;
