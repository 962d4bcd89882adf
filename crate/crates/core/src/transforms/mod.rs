//! Operations that build new dilations out of existing ones: frame changes,
//! composition of commuting channels, first-order perturbation, nonlinear
//! time rescaling and side-by-side independent qubits.

mod compose;
mod frame;
mod perturb;
mod rescale;
mod tensor;

pub use compose::{
    compose_commuting, reduced_channel, ComposeOptions, Composition, CompositionOrder,
};
pub use frame::{frame_change, FrameSpec};
pub use perturb::{
    envelope_projections, first_order_kraus, perturbative_channel, perturbative_dilation,
    perturbative_pipeline, EnvelopeProjection, FirstOrderKraus, PerturbOptions, PerturbationSpec,
    PerturbativeChannel, PerturbativeDilation, PerturbativeResult,
};
pub use rescale::{rescale_time, RescaleMap, RescaleOptions};
pub use tensor::{tensor_independent, IndependentDilations, TensorOptions};
