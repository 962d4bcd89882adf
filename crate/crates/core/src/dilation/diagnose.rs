use nalgebra::{DMatrix, DVector};
use serde::Serialize;

use crate::channel::{reshuffle, Superoperator};
use crate::dilation::{eigentrack, TrackOptions};
use crate::error::{DilateError, Result};
use crate::generators::{
    lindblad_superop, propagate_channel, ChannelFamily, LindbladSpec, PropagationOptions, TimeGrid,
};
use crate::linalg::{c, eigh_desc, frobenius_norm, identity, kron, operator_norm, CMatrix, I, ONE};

/// Zero-time evidence from the eigenvalue test.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ZeroTimeEvidence {
    /// Position in the ascending spectrum at `t = 0`.
    pub index: usize,
    pub lambda0: f64,
    pub lambda_dot0: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RankDrop {
    pub t: f64,
    pub index: usize,
    pub track: usize,
    pub lambda: f64,
}

/// Whether and where a dilation Hamiltonian can blow up or jump.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DivergenceReport {
    pub diverges_at_zero: bool,
    pub eigenvalue_test_diverges: bool,
    pub generator_test_diverges: bool,
    pub tests_agree: bool,
    pub flagged_for_review: bool,
    pub zero_time_evidence: Vec<ZeroTimeEvidence>,
    pub dissipative_generator_norm_at_zero: f64,
    pub generator_norm_at_zero: f64,
    pub rank_drop_times: Vec<RankDrop>,
    pub max_h_norm_observed: Option<f64>,
}

#[derive(Debug, Clone, Copy)]
pub struct DiagnoseOptions {
    /// Relative threshold, scaled by `1 + ‖L_0‖`, above which `λ̇(0)` and the
    /// dissipative remainder count as nonzero.
    pub tol: f64,
    /// Eigenvalues below `zero_tol · d` at `t = 0` are treated as zero.
    pub zero_tol: f64,
    /// Interior minima of a track below this value are reported as rank drops.
    pub rank_drop_tol: f64,
}

impl Default for DiagnoseOptions {
    fn default() -> Self {
        Self {
            tol: 1e-4,
            zero_tol: 1e-9,
            rank_drop_tol: 1e-5,
        }
    }
}

/// Slope at zero of every Choi eigenvalue that vanishes there, from the
/// ascending spectra at `t = 0, δt, 2δt` by a second-order one-sided
/// difference.
pub fn zero_eigenvalue_slopes(
    family: &ChannelFamily,
    zero_tol: f64,
) -> Result<Vec<ZeroTimeEvidence>> {
    if family.superops.len() < 3 {
        return Err(DilateError::InvalidInput(
            "the eigenvalue test needs at least three grid points".into(),
        ));
    }
    let d = family.dim();
    let spectrum = |n: usize| {
        let (mut v, _) = eigh_desc(reshuffle(&family.superops[n]).matrix());
        v.reverse();
        v
    };
    let (s0, s1, s2) = (spectrum(0), spectrum(1), spectrum(2));
    let dt = family.grid.dt();
    Ok((0..d * d)
        .filter(|&k| s0[k].abs() < zero_tol * d as f64)
        .map(|k| ZeroTimeEvidence {
            index: k,
            lambda0: s0[k],
            lambda_dot0: (-3.0 * s0[k] + 4.0 * s1[k] - s2[k]) / (2.0 * dt),
        })
        .collect())
}

fn hermitian_basis(d: usize) -> Vec<CMatrix> {
    let mut basis = Vec::with_capacity(d * d);
    for j in 0..d {
        for k in j..d {
            let mut a = CMatrix::zeros(d, d);
            if j == k {
                a[(j, j)] = ONE;
                basis.push(a);
            } else {
                a[(j, k)] = ONE;
                a[(k, j)] = ONE;
                basis.push(a);
                let mut b = CMatrix::zeros(d, d);
                b[(j, k)] = -I;
                b[(k, j)] = I;
                basis.push(b);
            }
        }
    }
    basis
}

/// Split a generator into its best commutator part `−i[A, ·]` (least squares
/// over Hermitian `A`) and return the norm of what is left.
pub fn dissipative_remainder(l0: &Superoperator) -> f64 {
    let d = l0.dim();
    let id = identity(d);
    let columns: Vec<CMatrix> = hermitian_basis(d)
        .iter()
        .map(|b| (kron(&id, b) - kron(&b.transpose(), &id)) * (-I))
        .collect();
    let rows = 2 * d.pow(4);
    let a = DMatrix::<f64>::from_fn(rows, columns.len(), |r, col| {
        let z = columns[col].as_slice()[r / 2];
        if r % 2 == 0 {
            z.re
        } else {
            z.im
        }
    });
    let b = DVector::<f64>::from_fn(rows, |r, _| {
        let z = l0.matrix().as_slice()[r / 2];
        if r % 2 == 0 {
            z.re
        } else {
            z.im
        }
    });
    let coeffs = a
        .clone()
        .svd(true, true)
        .solve(&b, 1e-12)
        .expect("both factors requested");
    let mut fitted = CMatrix::zeros(d * d, d * d);
    for (col, x) in columns.iter().zip(coeffs.iter()) {
        fitted += col * c(*x, 0.0);
    }
    frobenius_norm(&(l0.matrix() - fitted))
}

/// Generator at zero estimated from the family by a second-order one-sided
/// difference.
pub fn generator_from_family(family: &ChannelFamily) -> Result<Superoperator> {
    if family.superops.len() < 3 {
        return Err(DilateError::InvalidInput(
            "need at least three grid points to estimate the generator".into(),
        ));
    }
    let dt = family.grid.dt();
    let (e0, e1, e2) = (
        family.superops[0].matrix(),
        family.superops[1].matrix(),
        family.superops[2].matrix(),
    );
    Superoperator::new((e0 * c(-3.0, 0.0) + e1 * c(4.0, 0.0) - e2) * c(0.5 / dt, 0.0))
}

/// Run all three divergence tests on a channel family that starts at the
/// identity. `generator_at_zero` is used when known exactly; otherwise it is
/// estimated from the family.
pub fn diagnose(
    family: &ChannelFamily,
    generator_at_zero: Option<&Superoperator>,
    opts: DiagnoseOptions,
) -> Result<DivergenceReport> {
    if family.grid.t_start != 0.0 {
        return Err(DilateError::InvalidInput(
            "divergence diagnosis needs a family starting at t = 0".into(),
        ));
    }
    let l0 = match generator_at_zero {
        Some(l) => l.clone(),
        None => generator_from_family(family)?,
    };
    let l0_norm = operator_norm(l0.matrix());
    let threshold = opts.tol * (1.0 + l0_norm);

    let evidence = zero_eigenvalue_slopes(family, opts.zero_tol)?;
    let eigen_div = evidence.iter().any(|e| e.lambda_dot0.abs() > threshold);
    let remainder = dissipative_remainder(&l0);
    let generator_div = remainder > threshold;

    let choi: Vec<_> = family.superops.iter().map(reshuffle).collect();
    let et = eigentrack(&choi, &family.grid, TrackOptions::default())?;
    let mut drops = Vec::new();
    for (slot, &k) in et.retained.iter().enumerate() {
        let lam: Vec<f64> = et.values.iter().map(|v| v[k]).collect();
        let mut running_max = lam[0];
        for n in 1..lam.len() - 1 {
            running_max = running_max.max(lam[n - 1]);
            let local_min = lam[n] <= lam[n - 1] && lam[n] <= lam[n + 1];
            if local_min && lam[n] < opts.rank_drop_tol && running_max > 10.0 * opts.rank_drop_tol {
                drops.push(RankDrop {
                    t: family.grid.time(n),
                    index: n,
                    track: slot,
                    lambda: lam[n],
                });
            }
        }
    }
    log::debug!("diagnosis: eigenvalue test {eigen_div}, generator test {generator_div}, remainder {remainder:e}");
    Ok(DivergenceReport {
        diverges_at_zero: generator_div,
        eigenvalue_test_diverges: eigen_div,
        generator_test_diverges: generator_div,
        tests_agree: eigen_div == generator_div,
        flagged_for_review: eigen_div != generator_div,
        zero_time_evidence: evidence,
        dissipative_generator_norm_at_zero: remainder,
        generator_norm_at_zero: l0_norm,
        rank_drop_times: drops,
        max_h_norm_observed: None,
    })
}

/// Propagate `spec` on `grid` and diagnose with its exact generator at zero.
pub fn diagnose_spec(
    spec: &LindbladSpec,
    grid: &TimeGrid,
    opts: DiagnoseOptions,
) -> Result<DivergenceReport> {
    let family = propagate_channel(spec, grid, PropagationOptions { cptp_tol: None })?;
    let l0 = lindblad_superop(spec, 0.0)?;
    diagnose(&family, Some(&l0), opts)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::generators::presets;

    fn grid() -> TimeGrid {
        TimeGrid::new(0.0, 1.0, 1000).unwrap()
    }

    #[test]
    fn constant_dephasing_diverges() {
        let r = diagnose_spec(
            &presets::dephasing(1.0),
            &grid(),
            DiagnoseOptions::default(),
        )
        .unwrap();
        assert!(r.diverges_at_zero && r.tests_agree);
        assert!(r
            .zero_time_evidence
            .iter()
            .any(|e| (e.lambda_dot0 - 4.0).abs() < 1e-4));
    }

    #[test]
    fn unitary_family_is_bounded() {
        let r = diagnose_spec(
            &presets::unitary_only(1.3),
            &grid(),
            DiagnoseOptions::default(),
        )
        .unwrap();
        assert!(!r.diverges_at_zero && r.tests_agree);
        assert!(r.dissipative_generator_norm_at_zero < 1e-12);
        assert!(r.rank_drop_times.is_empty());
    }

    #[test]
    fn generator_estimate_from_family_agrees() {
        let fam = propagate_channel(
            &presets::amplitude_damping(0.5, 1.0),
            &grid(),
            PropagationOptions::default(),
        )
        .unwrap();
        let r = diagnose(&fam, None, DiagnoseOptions::default()).unwrap();
        assert!(r.diverges_at_zero && r.tests_agree);
    }

    #[test]
    fn spin_boson_rank_drop_is_found() {
        let spec = presets::spin_boson(presets::spin_boson_profile(1.0, 1.0));
        let g = TimeGrid::new(0.0, 8.0, 4000).unwrap();
        let r = diagnose_spec(&spec, &g, DiagnoseOptions::default()).unwrap();
        assert!(!r.diverges_at_zero && r.tests_agree);
        assert_eq!(r.rank_drop_times.len(), 1);
        assert!((r.rank_drop_times[0].t - 2.0 * std::f64::consts::PI).abs() < 5e-3);
    }
}
