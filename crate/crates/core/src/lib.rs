//! Time-resolved three-photon correlations for a quantum-relay setup in
//! which a laser-encoded input qubit is teleported onto an entangled
//! light-emitting-diode photon pair.

pub mod analysis;
pub mod engine;
pub mod error;
pub mod export;
pub mod grid;
pub mod mc;
pub mod optics;
pub mod sweep;

pub use error::{RelayError, Result};
