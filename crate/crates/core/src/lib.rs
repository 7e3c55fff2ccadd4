//! Simulation core for multipath interference in AMCW coaxial-scanning LiDAR.
//!
//! The crate is layered bottom-up:
//!
//! - [`signal`]: modulation, phasors, four-tap demodulation and phase/depth conversion.
//! - [`transport`]: the two-path (direct + A→B→A detour) light transport model.
//! - [`sensor`]: the avalanche-photodiode response and noise chain.
//! - [`dataset`]: labeled multi-frequency samples, splitting and CSV persistence.
//! - [`rng`]: stateless derivation of reproducible random substreams.

pub mod dataset;
pub mod error;
pub mod rng;
pub mod sensor;
pub mod signal;
pub mod transport;

pub use error::{Error, Result};
