//! Integration of dilated dynamics and comparison against oracles.

mod compare;
pub mod figures;
pub mod fixtures;
mod source;

pub use compare::{compare_paths, unitary_error_bound, unitary_errors, ComparisonReport};
pub use source::{
    evolve_dilated, ConstantHamiltonian, EvolveOptions, HamiltonianSource, SampledPath,
    SimulationResult,
};
