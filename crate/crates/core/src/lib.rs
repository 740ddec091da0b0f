//! Latency modelling of a permissioned-blockchain transaction pipeline:
//! a discrete-event simulator of endorsement, ordering and validation,
//! Exponential/Gamma/GEV fitting with Kolmogorov–Smirnov validation, and a
//! sweep harness that reports fitted parameters and operating regimes.

pub mod config;
pub mod dist;
pub mod error;
pub mod fit;
pub mod harness;
pub mod ks;
mod nan_as_null;
pub mod optim;
pub mod report;
pub mod sim;

pub use dist::{Distribution, Family};
pub use error::{Error, Result};
