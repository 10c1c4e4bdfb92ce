//! Downlink URLLC physical-layer simulation.

pub mod channel;
pub mod config;
pub mod codecs;
pub mod error;
pub mod frame;
pub mod latency;
pub mod link;
pub mod rng;
pub mod scenario;
pub mod system;

pub use error::{Error, Result};
