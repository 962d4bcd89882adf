//! Channel family → Choi path → tracked eigenpairs → Kraus family →
//! unitary completion → dilation Hamiltonian.

mod completion;
mod cutoff;
mod diagnose;
mod eigentrack;
mod hamiltonian;
mod kraus;

pub use completion::{complete_unitary, CompletionOptions, UnitaryPath};
pub use cutoff::{
    apply_cutoff, clamp_window_end, factorize, CutoffMode, CutoffPolicy, CutoffResult,
    Factorization,
};
pub use diagnose::{
    diagnose, diagnose_spec, dissipative_remainder, generator_from_family, zero_eigenvalue_slopes,
    DiagnoseOptions, DivergenceReport, RankDrop, ZeroTimeEvidence,
};
pub use eigentrack::{
    choi_from_eigenpairs, eigentrack, Crossing, EigenTrack, NearDegenerateBlock, RankPolicy,
    TrackOptions,
};
pub use hamiltonian::{hamiltonian_from_unitary, DilationPath};
pub use kraus::{kraus_from_eigentrack, KrausFamily};

use crate::channel::{reshuffle, ChoiMatrix};
use crate::error::Result;
use crate::generators::ChannelFamily;

pub fn choi_path(ch: &ChannelFamily) -> Vec<ChoiMatrix> {
    ch.superops.iter().map(reshuffle).collect()
}

#[derive(Debug, Clone)]
pub struct DilationOptions {
    pub track: TrackOptions,
    pub completion: CompletionOptions,
    /// Largest tolerated `|Σ M_k† M_k − 𝟙|`.
    pub kraus_tol: f64,
    /// Whether `H` diverges at the first grid point; `None` decides from the
    /// slopes of the vanishing Choi eigenvalues there.
    pub divergent_at_start: Option<bool>,
}

impl Default for DilationOptions {
    fn default() -> Self {
        Self {
            track: TrackOptions::default(),
            completion: CompletionOptions::default(),
            kraus_tol: 1e-8,
            divergent_at_start: None,
        }
    }
}

/// Every intermediate of the pipeline.
#[derive(Debug, Clone)]
pub struct Dilation {
    pub track: EigenTrack,
    pub kraus: KrausFamily,
    pub completion_steps: Vec<f64>,
    pub path: DilationPath,
    pub divergent_at_start: bool,
}

/// Build the dilation of a channel family.
pub fn dilate(family: &ChannelFamily, opts: &DilationOptions) -> Result<Dilation> {
    let choi = choi_path(family);
    let track = eigentrack(&choi, &family.grid, opts.track)?;
    let kraus = kraus_from_eigentrack(&track, opts.kraus_tol)?;
    let unitary = complete_unitary(&kraus, &opts.completion)?;
    let divergent_at_start = match opts.divergent_at_start {
        Some(v) => v,
        None => {
            let l0_scale = 1.0
                + generator_from_family(family)
                    .map(|g| crate::linalg::operator_norm(g.matrix()))?;
            zero_eigenvalue_slopes(family, DiagnoseOptions::default().zero_tol)?
                .iter()
                .any(|e| e.lambda_dot0.abs() > DiagnoseOptions::default().tol * l0_scale)
        }
    };
    let path = hamiltonian_from_unitary(&unitary, divergent_at_start);
    log::info!(
        "dilation: rank {}, {} crossings, max completion step {:e}, divergent start {}",
        track.rank(),
        track.crossings.len(),
        unitary.completion_steps.iter().copied().fold(0.0, f64::max),
        divergent_at_start
    );
    Ok(Dilation {
        track,
        kraus,
        completion_steps: unitary.completion_steps,
        path,
        divergent_at_start,
    })
}
