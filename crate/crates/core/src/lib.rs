//! System-level simulation of LTE-class cellular networks serving
//! low-altitude aerial UEs.
//!
//! The crate covers the hexagonal deployment, base-station antenna
//! synthesis, the large-scale channel, terrain ray tracing, downlink and
//! uplink analyses and a set of interference/mobility experiments.

pub mod antenna;
pub mod channel;
pub mod config;
pub mod deployment;
pub mod downlink;
pub mod enhancements;
pub mod error;
pub mod experiment;
pub mod ledger;
pub mod output;
pub mod rate;
pub mod rng;
pub mod scenario;
pub mod stats;
pub mod terrain;
pub mod uplink;

pub use error::{Result, SimError};
