//! Time-dependent Lindbladians, their channel families and the
//! master-equation oracle.

mod lindblad;
pub mod presets;
mod profile;

pub use lindblad::{
    evolve_state_master, lindblad_superop, propagate_channel, step_propagator, ChannelFamily,
    HamiltonianTerm, JumpTerm, LindbladSpec, PropagationOptions, StatePath, TimeGrid,
};
pub use profile::TimeProfile;
