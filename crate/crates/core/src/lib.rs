//! Adaptive Bayesian optimization with a per-iteration choice of acquisition
//! function.
pub mod acquisition;
pub mod analysis;
pub mod cli;
pub mod benchmarks;
pub mod error;
pub mod harness;
pub mod llm;
pub mod lowdisc;
pub mod optimize;
pub mod rng;
pub mod space;
pub mod stats;
pub mod strategist;
pub mod surrogate;
pub use error::{Error, Result};
