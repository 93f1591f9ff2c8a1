//! Scenario configuration, experiment runner, result cache, and report
//! emission for the TFM simulation lab.

pub mod config;
pub mod reports;
pub mod runner;
