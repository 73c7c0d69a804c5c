//! Delay-minimizing task offloading for THz multi-UAV relayed mobile edge computing.

pub mod channel;
pub mod delay_model;
pub mod error;
pub mod harness;
pub mod baselines;
pub mod numerics;
pub mod pdd;
pub mod queueing;
pub mod report;
pub mod scenario;

pub use error::{Error, Result};
