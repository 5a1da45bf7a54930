//! Numerical laboratory for generalized Bose-Einstein condensation of the
//! perfect Bose gas in the Luttinger-Sy random potential and in weak scaled
//! potentials.

pub mod disorder;
pub mod error;
pub mod ids;
pub mod numerics;
pub mod occupation;
pub mod pathint;
pub mod scaledpot;
pub mod spectral;
pub mod thermo;

pub use error::{Error, Result};
