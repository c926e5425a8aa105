//! Resonant atom–cavity dynamics: Jaynes–Cummings evolution of coherent
//! fields, their split into phase components, cavity damping and homodyne
//! readout of the field phase.

pub mod approx;
pub mod error;
pub mod experiments;
pub mod fit;
pub mod fock;
pub mod jc;
pub mod lindblad;
pub mod linalg;
pub mod measurement;
pub mod selftest;
pub mod trace;

pub use error::{Error, Result};
