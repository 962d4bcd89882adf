//! Time-continuous Stinespring dilations of open-system dynamics.
//!
//! A channel family `ε_t` is turned into a Hamiltonian `H(t)` on
//! system ⊗ ancilla whose unitary evolution, traced over the ancilla,
//! reproduces `ε_t(ρ)` at every time.

pub mod channel;
pub mod dilation;
pub mod error;
pub mod generators;
pub mod linalg;
pub mod numerics;
pub mod transforms;
pub mod verify;

pub use error::{DilateError, Result};
