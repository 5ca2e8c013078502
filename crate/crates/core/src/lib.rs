//! Wave-packet laboratory for the semiclassical two-level cubic Schrodinger
//! system `i eps dpsi/dt = -(eps^2/2) Lap psi + V(x) psi + Lambda eps^beta |psi|^2 psi`.
//!
//! The crate builds the Gaussian wave-packet approximation (classical flow,
//! envelope equation, polarized ansatz), propagates the exact system with a
//! split-step spectral scheme, and measures the approximation error across
//! ladders of `eps`.

pub mod classical;
pub mod error;
pub mod experiments;
pub mod fields;
pub mod linalg;
pub mod potential;
pub mod profile;
pub mod solver;

pub use error::{Result, WpError};
pub use potential::{MatrixPotential, Mode, PotentialKind};
