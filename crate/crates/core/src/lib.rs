//! Vehicle access authentication: EDR-digest proactive check, keyed
//! challenge-response with timing and gait verification, optional Schnorr or
//! Pedersen exchange, and a deterministic relay-attack simulator with a trace
//! checker for the Lowe authentication hierarchy.

pub mod commitments;
pub mod config;
pub mod edr;
pub mod group;
pub mod hash;
pub mod properties;
pub mod protocol;
pub mod report;
pub mod sim;
pub mod sweep;

pub const VERSION: &str = env!("CARGO_PKG_VERSION");
