//! Experiment runner for the multical library: configuration loading, run
//! execution with exact audits, sweeps, stored-predictor audits and a
//! self-test.

pub mod audit_cmd;
pub mod config;
pub mod error;
pub mod output;
pub mod runner;
pub mod selftest;
pub mod sweep;
