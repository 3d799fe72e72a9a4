//! Command-line pipeline around `paramid-core`: configuration, staged
//! execution and report emission.

pub mod app;
pub mod config;
pub mod pipeline;
pub mod report;
