//! DIAL: decentralized per-OSC I/O autotuning for Lustre-like parallel file
//! systems, plus the discrete-event simulator it is trained and evaluated on.

pub mod agent;
pub mod error;
pub mod experiment;
pub mod gbdt;
pub mod metrics;
pub mod provenance;
pub mod sim;
pub mod tuner;
pub mod workload;

pub use error::{Error, Result};
