//! Simulation of environment-assisted quantum transport (ENAQT) in networks of
//! evanescently coupled waveguides.
//!
//! The crate builds wavelength-dependent tight-binding Hamiltonians for small
//! waveguide networks, propagates light through them coherently, with an
//! irreversible sink, or under a dephasing master equation, and measures how
//! much broadband (partially incoherent) illumination enhances the fraction of
//! light that reaches the sink.
//!
//! Units throughout: propagation constants, couplings and rates in cm⁻¹,
//! propagation distances in cm, wavelengths in nm.

pub mod analysis;
pub mod calibration;
pub mod cli;
pub mod decoherence;
mod error;
pub mod exec;
pub mod lattice;
pub mod linalg;
pub mod propagate;
pub mod quadrature;

pub use error::{Error, Result};
pub use exec::Execution;

pub use nalgebra::Complex;

/// Complex amplitude type used for states and density matrices.
pub type C64 = Complex<f64>;
