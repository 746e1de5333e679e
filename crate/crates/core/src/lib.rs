//! Discrete-event simulation of human content-review queues.

pub mod allocation;
pub mod casebook;
pub mod domain;
pub mod engine;
pub mod error;
pub mod metrics;
pub mod policy;
pub mod reaper;
pub mod runner;
pub mod scenario;
pub mod workload;

pub use error::{Error, Result};
