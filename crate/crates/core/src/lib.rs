//! Quality-diversity coevolution of small generator/discriminator
//! architectures.

pub mod config;
pub mod data;
pub mod engine;
pub mod error;
pub mod genome;
pub mod harness;
pub mod metrics;
pub mod nn;
pub mod phenotype;
pub mod qd;
pub mod rng;
pub mod train;

pub use error::{Error, Result};

/// Fitness assigned to individuals that failed training or evaluation.
pub const WORST_FITNESS: f64 = f64::MAX;
