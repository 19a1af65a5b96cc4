//! Modelling and analysis of unseeded, gain-unbalanced SU(1,1) interferometers
//! with direct detection.

pub mod analysis;
pub mod detection;
pub mod error;
pub mod fock;
pub mod gaussian;
pub mod interferometer;
pub mod montecarlo;

pub use error::{Error, Result};
