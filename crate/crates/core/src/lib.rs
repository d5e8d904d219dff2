//! Deterministic single-lane traffic simulation with pluggable car-following
//! controllers, a bilateral multi-agent RL environment, and a desk-scale DDPG
//! trainer with a benchmark harness underneath the `platoon` CLI.

pub mod config;
pub mod controllers;
pub mod env;
pub mod error;
pub mod learner;
pub mod metrics;
pub mod record;
pub mod reward;
pub mod sim;

pub use error::{Error, Result};
