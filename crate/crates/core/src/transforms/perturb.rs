//! First-order perturbation of a dilation in a small extra generator.
//!
//! For `L = L⁽⁰⁾ + δL⁽¹⁾` the channel is `ε⁽⁰⁾ + δε⁽¹⁾ + O(δ²)` with
//! `ε⁽¹⁾_t = ∫₀ᵗ ε⁽⁰⁾_{(t,τ)} L⁽¹⁾_τ ε⁽⁰⁾_{(τ,0)} dτ`. The Kraus operators,
//! the unitary and the Hamiltonian are corrected to the same order while the
//! Kraus rank stays fixed.

use serde::Serialize;

use crate::channel::{reshuffle, ChoiMatrix, Superoperator};
use crate::dilation::{dilate, Dilation, DilationOptions, DilationPath, EigenTrack};
use crate::error::{DilateError, Result};
use crate::generators::{
    lindblad_superop, propagate_channel, step_propagator, ChannelFamily, LindbladSpec,
    PropagationOptions, TimeGrid,
};
use crate::linalg::{
    anti_hermitian_part, c, hermitian_part, hs_inner, identity, operator_norm, polar_unitary,
    unvec_col, CMatrix, CVector, I,
};
use crate::numerics::differentiate;

/// `L⁽⁰⁾ + δL⁽¹⁾`
#[derive(Debug, Clone)]
pub struct PerturbationSpec {
    pub base: LindbladSpec,
    pub perturbation: LindbladSpec,
    pub delta: f64,
}

impl PerturbationSpec {
    pub fn new(base: LindbladSpec, perturbation: LindbladSpec, delta: f64) -> Result<Self> {
        if base.dim() != perturbation.dim() {
            return Err(DilateError::Dimension(format!(
                "base acts on {}, perturbation on {}",
                base.dim(),
                perturbation.dim()
            )));
        }
        if !(delta >= 0.0 && delta.is_finite()) {
            return Err(DilateError::InvalidInput(format!(
                "delta must be finite and non-negative, got {delta}"
            )));
        }
        Ok(Self {
            base,
            perturbation,
            delta,
        })
    }

    /// The unexpanded generator.
    pub fn full(&self) -> Result<LindbladSpec> {
        self.base.plus(&self.perturbation.scaled(self.delta))
    }
}

/// `ε⁽⁰⁾` and `ε⁽¹⁾` on a grid.
#[derive(Debug, Clone)]
pub struct PerturbativeChannel {
    pub grid: TimeGrid,
    pub delta: f64,
    pub base: Vec<Superoperator>,
    pub first_order: Vec<Superoperator>,
}

impl PerturbativeChannel {
    /// `ε⁽⁰⁾ + δε⁽¹⁾` at grid point `n`.
    pub fn combined(&self, n: usize) -> Superoperator {
        Superoperator::new(
            self.base[n].matrix() + self.first_order[n].matrix() * c(self.delta, 0.0),
        )
        .expect("shapes agree")
    }

    pub fn base_family(&self) -> ChannelFamily {
        ChannelFamily {
            grid: self.grid,
            superops: self.base.clone(),
        }
    }
}

/// First-order channel by the trapezoidal rule, accumulated in one sweep:
/// with `S_n = Φ_n S_{n−1} + δt L⁽¹⁾_{t_n} ε⁽⁰⁾_{t_n}` and `Φ_n` the step
/// propagator, `ε⁽¹⁾_{t_n} = S_n − ½δt L⁽¹⁾_{t_n} ε⁽⁰⁾_{t_n}`.
pub fn perturbative_channel(p: &PerturbationSpec, grid: &TimeGrid) -> Result<PerturbativeChannel> {
    if grid.t_start != 0.0 {
        return Err(DilateError::InvalidInput(
            "the perturbative channel is accumulated from t = 0".into(),
        ));
    }
    let base = propagate_channel(&p.base, grid, PropagationOptions { cptp_tol: None })?.superops;
    let dt = grid.dt();
    let source = |n: usize| -> Result<CMatrix> {
        Ok(lindblad_superop(&p.perturbation, grid.time(n))?.matrix() * base[n].matrix())
    };
    let mut first_order = Vec::with_capacity(grid.len());
    let a0 = source(0)?;
    let mut s = &a0 * c(0.5 * dt, 0.0);
    first_order.push(Superoperator::zero(p.base.dim()));
    for n in 1..grid.len() {
        let phi = step_propagator(&p.base, grid.time(n - 1), grid.time(n))?;
        let a = source(n)?;
        s = phi.matrix() * s + &a * c(dt, 0.0);
        first_order.push(Superoperator::new(&s - a * c(0.5 * dt, 0.0))?);
    }
    Ok(PerturbativeChannel {
        grid: *grid,
        delta: p.delta,
        base,
        first_order,
    })
}

#[derive(Debug, Clone, Copy)]
pub struct PerturbOptions {
    /// Relative size of `P₀Λ⁽¹⁾P₀` (weight on the vanishing Choi directions)
    /// beyond which the Kraus rank would change.
    pub rank_tol: f64,
    /// Retained eigenvalues closer than this are treated as degenerate.
    pub degeneracy_tol: f64,
}

impl Default for PerturbOptions {
    fn default() -> Self {
        Self {
            rank_tol: 1e-6,
            degeneracy_tol: 1e-8,
        }
    }
}

/// First-order Kraus corrections aligned with the base tracks.
#[derive(Debug, Clone)]
pub struct FirstOrderKraus {
    pub grid: TimeGrid,
    pub dim: usize,
    pub ops: Vec<Vec<CMatrix>>,
    /// Grid points before this one have a vanishing retained eigenvalue and
    /// carry zero corrections.
    pub first_defined: usize,
    pub max_null_weight: f64,
}

/// Nondegenerate eigen-perturbation of each retained Choi track:
/// `λ⁽¹⁾ = v†Λ⁽¹⁾v`,
/// `v⁽¹⁾ = Σ_{j≠k} v_j (v_j†Λ⁽¹⁾v_k)/(λ_k − λ_j) + P₀Λ⁽¹⁾v_k/λ_k`,
/// and `M⁽¹⁾ = λ⁽¹⁾/(2√λ) unvec(v) + √λ unvec(v⁽¹⁾)`.
///
/// Degenerate retained pairs may only be coupled negligibly: the base
/// vectors are already fixed by the base dilation and cannot be re-chosen.
pub fn first_order_kraus(
    track: &EigenTrack,
    choi1: &[ChoiMatrix],
    opts: PerturbOptions,
) -> Result<FirstOrderKraus> {
    if choi1.len() != track.grid.len() {
        return Err(DilateError::GridMismatch(
            "first-order Choi path must match the track grid".into(),
        ));
    }
    let (d, r) = (track.dim, track.rank());
    let floor = 1e-12 * d as f64;
    let mut ops = Vec::with_capacity(choi1.len());
    let mut first_defined = 0;
    let mut max_null_weight: f64 = 0.0;
    for (n, l1) in choi1.iter().enumerate() {
        let l1 = l1.matrix();
        let scale = 1.0 + operator_norm(l1);
        let lams: Vec<f64> = (0..r).map(|k| track.lambda(k, n)).collect();
        let vecs: Vec<CVector> = (0..r).map(|k| track.vector(k, n)).collect();
        let mut p0 = identity(d * d);
        for v in &vecs {
            p0 -= v * v.adjoint();
        }
        let weight = operator_norm(&(&p0 * l1 * &p0));
        if weight > opts.rank_tol * scale {
            return Err(DilateError::RankChange {
                index: n,
                t: track.grid.time(n),
                weight,
            });
        }
        max_null_weight = max_null_weight.max(weight);
        if lams.iter().any(|&l| l <= floor) {
            if n == first_defined {
                first_defined = n + 1;
                ops.push(vec![CMatrix::zeros(d, d); r]);
                continue;
            }
            return Err(DilateError::RankChange {
                index: n,
                t: track.grid.time(n),
                weight: 0.0,
            });
        }
        let mut set = Vec::with_capacity(r);
        for k in 0..r {
            let lv = l1 * &vecs[k];
            let lam1 = vecs[k].dotc(&lv).re;
            let mut v1 = (&p0 * &lv).unscale(lams[k]);
            for j in (0..r).filter(|&j| j != k) {
                let coupling = vecs[j].dotc(&lv);
                let gap = lams[k] - lams[j];
                if gap.abs() <= opts.degeneracy_tol {
                    if coupling.norm() > opts.rank_tol * scale {
                        return Err(DilateError::InvalidInput(format!(
                            "perturbation mixes degenerate Kraus tracks {j} and {k} at grid point {n} (t = {})",
                            track.grid.time(n)
                        )));
                    }
                    continue;
                }
                v1 += &vecs[j] * (coupling / gap);
            }
            let sq = lams[k].sqrt();
            set.push(
                unvec_col(vecs[k].as_slice(), d) * c(lam1 / (2.0 * sq), 0.0)
                    + unvec_col(v1.as_slice(), d) * c(sq, 0.0),
            );
        }
        ops.push(set);
    }
    Ok(FirstOrderKraus {
        grid: track.grid,
        dim: d,
        ops,
        first_defined,
        max_null_weight,
    })
}

/// First-order corrections to a dilation.
#[derive(Debug, Clone)]
pub struct PerturbativeDilation {
    pub grid: TimeGrid,
    pub system_dim: usize,
    pub ancilla_dim: usize,
    pub u1: Vec<CMatrix>,
    pub h1: Vec<CMatrix>,
    pub first_defined: usize,
    /// `max ‖herm(Q†K)‖`, the first-order completeness defect.
    pub compatibility_residual: f64,
    pub anti_hermitian_residual: Vec<f64>,
}

impl PerturbativeDilation {
    /// `U⁽⁰⁾ + δU⁽¹⁾` (projected to the nearest unitary) and
    /// `H⁽⁰⁾ + δH⁽¹⁾`.
    pub fn combined(&self, base: &DilationPath, delta: f64) -> DilationPath {
        let f = c(delta, 0.0);
        DilationPath {
            grid: self.grid,
            system_dim: self.system_dim,
            ancilla_dim: self.ancilla_dim,
            unitaries: base
                .unitaries
                .iter()
                .zip(&self.u1)
                .map(|(u0, u1)| polar_unitary(&(u0 + u1 * f)))
                .collect(),
            hamiltonians: base
                .hamiltonians
                .iter()
                .zip(&self.h1)
                .map(|(h0, h1)| hermitian_part(&(h0 + h1 * f)))
                .collect(),
            anti_hermitian_residual: base
                .anti_hermitian_residual
                .iter()
                .zip(&self.anti_hermitian_residual)
                .map(|(a, b)| a + delta * b)
                .collect(),
            first_defined: self.first_defined,
        }
    }
}

/// `U⁽¹⁾ = A U⁽⁰⁾` with `A` anti-Hermitian of least Frobenius norm such that
/// `⟨k_B|U⁽¹⁾|0_B⟩ = M_k⁽¹⁾`, then `H⁽¹⁾ = (i U̇⁽¹⁾ − H⁽⁰⁾U⁽¹⁾) U⁽⁰⁾†`.
///
/// With `Q` the constrained columns of `U⁽⁰⁾` and `K` those built from
/// `M⁽¹⁾`, `A = (𝟙−P)KQ† − QK†(𝟙−P) + Q·ah(Q†K)·Q†` where `P = QQ†`.
pub fn perturbative_dilation(
    base: &DilationPath,
    kraus1: &FirstOrderKraus,
) -> Result<PerturbativeDilation> {
    let (d, r) = (base.system_dim, base.ancilla_dim);
    if !base.grid.same_as(&kraus1.grid)
        || kraus1.dim != d
        || kraus1.ops.first().map_or(0, Vec::len) != r
    {
        return Err(DilateError::Dimension(
            "first-order Kraus family does not match the base dilation".into(),
        ));
    }
    let n = d * r;
    let fd = base.first_defined.max(kraus1.first_defined);
    let mut u1 = Vec::with_capacity(base.grid.len());
    let mut compat: f64 = 0.0;
    for (idx, (u0, ops)) in base.unitaries.iter().zip(&kraus1.ops).enumerate() {
        if idx < fd {
            u1.push(CMatrix::zeros(n, n));
            continue;
        }
        let q = CMatrix::from_fn(n, d, |row, j| u0[(row, j * r)]);
        let k = CMatrix::from_fn(n, d, |row, j| ops[row % r][(row / r, j)]);
        let qk = q.adjoint() * &k;
        compat = compat.max(operator_norm(&hermitian_part(&qk)));
        let comp = identity(n) - &q * q.adjoint();
        let a = &comp * &k * q.adjoint() - &q * k.adjoint() * &comp
            + &q * anti_hermitian_part(&qk) * q.adjoint();
        u1.push(a * u0);
    }
    let mut h1 = vec![CMatrix::zeros(n, n); base.grid.len()];
    let mut residual = vec![0.0; base.grid.len()];
    if fd < base.grid.len() {
        let du = differentiate(&u1[fd..], base.grid.dt());
        for (off, du_n) in du.iter().enumerate() {
            let idx = fd + off;
            let raw =
                (du_n * I - &base.hamiltonians[idx] * &u1[idx]) * base.unitaries[idx].adjoint();
            residual[idx] = operator_norm(&anti_hermitian_part(&raw));
            h1[idx] = hermitian_part(&raw);
        }
    }
    Ok(PerturbativeDilation {
        grid: base.grid,
        system_dim: d,
        ancilla_dim: r,
        u1,
        h1,
        first_defined: fd,
        compatibility_residual: compat,
        anti_hermitian_residual: residual,
    })
}

/// Every stage of the perturbative construction.
#[derive(Debug, Clone)]
pub struct PerturbativeResult {
    pub channel: PerturbativeChannel,
    pub base: Dilation,
    pub kraus1: FirstOrderKraus,
    pub dilation: PerturbativeDilation,
}

impl PerturbativeResult {
    pub fn combined_path(&self) -> DilationPath {
        self.dilation.combined(&self.base.path, self.channel.delta)
    }
}

pub fn perturbative_pipeline(
    p: &PerturbationSpec,
    grid: &TimeGrid,
    dilation: &DilationOptions,
    opts: PerturbOptions,
) -> Result<PerturbativeResult> {
    let channel = perturbative_channel(p, grid)?;
    let base = dilate(&channel.base_family(), dilation)?;
    let choi1: Vec<ChoiMatrix> = channel.first_order.iter().map(reshuffle).collect();
    let kraus1 = first_order_kraus(&base.track, &choi1, opts)?;
    let pd = perturbative_dilation(&base.path, &kraus1)?;
    Ok(PerturbativeResult {
        channel,
        base,
        kraus1,
        dilation: pd,
    })
}

/// Coefficient series of `H` along fixed Hermitian operators.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EnvelopeProjection {
    pub label: String,
    pub coefficients: Vec<f64>,
}

/// Hilbert–Schmidt projections `Re⟨P, H⟩/⟨P, P⟩` of each `H` onto each
/// operator `P`, plus the norm of what the operators leave unexplained.
pub fn envelope_projections(
    path: &[CMatrix],
    ops: &[(&str, CMatrix)],
) -> (Vec<EnvelopeProjection>, Vec<f64>) {
    let mut out: Vec<EnvelopeProjection> = ops
        .iter()
        .map(|(l, _)| EnvelopeProjection {
            label: l.to_string(),
            coefficients: Vec::with_capacity(path.len()),
        })
        .collect();
    let mut residual = Vec::with_capacity(path.len());
    for h in path {
        let mut rest = h.clone();
        for ((_, p), proj) in ops.iter().zip(out.iter_mut()) {
            let coeff = hs_inner(p, h).re / hs_inner(p, p).re;
            rest -= p * c(coeff, 0.0);
            proj.coefficients.push(coeff);
        }
        residual.push(operator_norm(&rest));
    }
    (out, residual)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::generators::{presets, TimeProfile};
    use crate::linalg::{max_abs, pauli};

    fn drive() -> LindbladSpec {
        LindbladSpec::empty(2)
            .with_hamiltonian(pauli::x(), TimeProfile::constant(1.0))
            .unwrap()
    }

    #[test]
    fn zero_perturbation_gives_zero_path() {
        let p = PerturbationSpec::new(
            presets::amplitude_damping(1.0, 0.0),
            LindbladSpec::empty(2),
            0.1,
        )
        .unwrap();
        let pc = perturbative_channel(&p, &TimeGrid::new(0.0, 1.0, 50).unwrap()).unwrap();
        assert!(pc.first_order.iter().all(|s| max_abs(s.matrix()) == 0.0));
    }

    #[test]
    fn constant_perturbation_alone_integrates_linearly() {
        let p = PerturbationSpec::new(LindbladSpec::empty(2), drive(), 0.1).unwrap();
        let grid = TimeGrid::new(0.0, 2.0, 40).unwrap();
        let pc = perturbative_channel(&p, &grid).unwrap();
        let l1 = lindblad_superop(&drive(), 0.0).unwrap();
        for (n, s) in pc.first_order.iter().enumerate() {
            assert!(max_abs(&(s.matrix() - l1.matrix() * c(grid.time(n), 0.0))) < 1e-13);
        }
    }

    #[test]
    fn first_order_channel_matches_finite_difference_in_delta() {
        let base = presets::amplitude_damping(1.0, 0.0);
        let grid = TimeGrid::new(0.0, 2.0, 2000).unwrap();
        let pc = perturbative_channel(
            &PerturbationSpec::new(base.clone(), drive(), 0.0).unwrap(),
            &grid,
        )
        .unwrap();
        let eps = 1e-4;
        let plus = propagate_channel(
            &base.plus(&drive().scaled(eps)).unwrap(),
            &grid,
            PropagationOptions::default(),
        )
        .unwrap();
        let minus = propagate_channel(
            &base.plus(&drive().scaled(-eps)).unwrap(),
            &grid,
            PropagationOptions::default(),
        )
        .unwrap();
        let n = grid.len() - 1;
        let fd = (plus.superops[n].matrix() - minus.superops[n].matrix()) * c(0.5 / eps, 0.0);
        assert!(max_abs(&(fd - pc.first_order[n].matrix())) < 1e-6);
    }

    #[test]
    fn zero_kraus_correction_gives_zero_hamiltonian() {
        let grid = TimeGrid::new(0.0, 1.0, 200).unwrap();
        let family = propagate_channel(
            &presets::amplitude_damping(1.0, 0.0),
            &grid,
            PropagationOptions::default(),
        )
        .unwrap();
        let base = dilate(&family, &DilationOptions::default()).unwrap();
        let zeros = vec![vec![CMatrix::zeros(2, 2); base.track.rank()]; grid.len()];
        let k1 = FirstOrderKraus {
            grid,
            dim: 2,
            ops: zeros,
            first_defined: 0,
            max_null_weight: 0.0,
        };
        let pd = perturbative_dilation(&base.path, &k1).unwrap();
        assert!(pd.h1.iter().all(|h| max_abs(h) == 0.0));
    }

    #[test]
    fn dissipative_perturbation_of_unitary_family_changes_rank() {
        let p = PerturbationSpec::new(presets::unitary_only(1.0), presets::dephasing(1.0), 0.01)
            .unwrap();
        let grid = TimeGrid::new(0.0, 0.5, 100).unwrap();
        let err = perturbative_pipeline(
            &p,
            &grid,
            &DilationOptions::default(),
            PerturbOptions::default(),
        )
        .unwrap_err();
        assert!(matches!(err, DilateError::RankChange { .. }), "{err:?}");
    }
}
