//! Channel representations and the conversions between them.
//!
//! Conventions, fixed crate-wide:
//!
//! * States are vectorized by stacking columns, `vec(ρ)[i + j·d] = ρ[i, j]`,
//!   so `vec(A ρ B) = (Bᵀ ⊗ A) vec(ρ)` and a Kraus set `{M_k}` has the
//!   superoperator `Σ_k conj(M_k) ⊗ M_k`.
//! * The Choi matrix is unnormalized (trace `d`) and ordered reference ⊗
//!   system: `Λ = Σ_ab |a⟩⟨b| ⊗ ε(|a⟩⟨b|) = (𝓘 ⊗ ε)|Ω⟩⟨Ω|` with
//!   `|Ω⟩ = Σ_j |j j⟩`. In index form
//!   `Λ[a·d + i, b·d + j] = S[i + j·d, a + b·d]`, a permutation of entries
//!   that is its own inverse.
//! * With this ordering an eigenvector `v` of `Λ` with eigenvalue `λ` gives
//!   the Kraus operator `√λ · unvec(v)`.

use crate::error::{DilateError, Result};
use crate::linalg::{
    self, c, eigh_desc, hermitian_part, hermiticity_residual, identity, kron, max_abs,
    min_eigenvalue, partial_trace_second, unvec_col, vec_col, CMatrix, CVector,
};

/// Default tolerance for validity checks.
pub const DEFAULT_TOL: f64 = 1e-9;

/// A validated `d × d` density matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct DensityMatrix(CMatrix);

impl DensityMatrix {
    /// Validates Hermiticity, unit trace and positivity to `tol`.
    pub fn new(m: CMatrix, tol: f64) -> Result<Self> {
        if !m.is_square() {
            return Err(DilateError::Dimension(format!(
                "density matrix must be square, got {:?}",
                m.shape()
            )));
        }
        let herm = hermiticity_residual(&m);
        if herm > tol {
            return Err(DilateError::InvalidInput(format!(
                "density matrix not Hermitian (residual {herm:e})"
            )));
        }
        let tr = m.trace();
        if (tr - linalg::ONE).norm() > tol {
            return Err(DilateError::InvalidInput(format!(
                "density matrix trace is {tr}, expected 1"
            )));
        }
        let min = min_eigenvalue(&m);
        if min < -tol {
            return Err(DilateError::InvalidInput(format!(
                "density matrix has eigenvalue {min:e}"
            )));
        }
        Ok(Self(m))
    }

    pub fn pure(psi: &CVector) -> Self {
        let norm = psi.norm();
        let psi = psi / c(norm, 0.0);
        Self(linalg::projector(&psi))
    }

    /// `|k⟩⟨k|` in dimension `d`.
    pub fn basis(d: usize, k: usize) -> Self {
        let mut m = CMatrix::zeros(d, d);
        m[(k, k)] = linalg::ONE;
        Self(m)
    }

    pub fn maximally_mixed(d: usize) -> Self {
        Self(identity(d) * c(1.0 / d as f64, 0.0))
    }

    /// Wraps a matrix without checking it.
    pub fn from_matrix_unchecked(m: CMatrix) -> Self {
        Self(m)
    }

    pub fn matrix(&self) -> &CMatrix {
        &self.0
    }

    pub fn into_matrix(self) -> CMatrix {
        self.0
    }

    pub fn dim(&self) -> usize {
        self.0.nrows()
    }

    pub fn purity(&self) -> f64 {
        (&self.0 * &self.0).trace().re
    }
}

/// Channel matrix acting on column-stacked `d × d` states.
#[derive(Debug, Clone, PartialEq)]
pub struct Superoperator {
    matrix: CMatrix,
    dim: usize,
}

fn square_root_dim(n: usize) -> Option<usize> {
    let d = (n as f64).sqrt().round() as usize;
    (d * d == n).then_some(d)
}

impl Superoperator {
    pub fn new(matrix: CMatrix) -> Result<Self> {
        if !matrix.is_square() {
            return Err(DilateError::Dimension(format!(
                "superoperator must be square, got {:?}",
                matrix.shape()
            )));
        }
        let dim = square_root_dim(matrix.nrows()).ok_or_else(|| {
            DilateError::Dimension(format!(
                "superoperator size {} is not a perfect square",
                matrix.nrows()
            ))
        })?;
        Ok(Self { matrix, dim })
    }

    pub fn identity(d: usize) -> Self {
        Self {
            matrix: identity(d * d),
            dim: d,
        }
    }

    pub fn zero(d: usize) -> Self {
        Self {
            matrix: CMatrix::zeros(d * d, d * d),
            dim: d,
        }
    }

    /// Conjugation by a unitary, `ρ ↦ U ρ U†`.
    pub fn from_unitary(u: &CMatrix) -> Self {
        Self {
            matrix: kron(&u.map(|z| z.conj()), u),
            dim: u.nrows(),
        }
    }

    pub fn matrix(&self) -> &CMatrix {
        &self.matrix
    }

    pub fn into_matrix(self) -> CMatrix {
        self.matrix
    }

    /// Hilbert-space dimension `d` of the states the channel acts on.
    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn apply(&self, rho: &CMatrix) -> CMatrix {
        let v = &self.matrix * vec_col(rho);
        unvec_col(v.as_slice(), self.dim)
    }

    /// `self ∘ other`: apply `other` first.
    pub fn compose(&self, other: &Superoperator) -> Superoperator {
        Superoperator {
            matrix: &self.matrix * &other.matrix,
            dim: self.dim,
        }
    }

    /// Tensor product channel on `A ⊗ B` (`self` on `A`).
    pub fn tensor(&self, other: &Superoperator) -> Superoperator {
        let (da, db) = (self.dim, other.dim);
        let d = da * db;
        // vec index of (i_a i_b, j_a j_b) in the joint column-stacked layout
        let joint =
            |ia: usize, ib: usize, ja: usize, jb: usize| (ia * db + ib) + (ja * db + jb) * d;
        let mut m = CMatrix::zeros(d * d, d * d);
        for ia in 0..da {
            for ja in 0..da {
                for ka in 0..da {
                    for la in 0..da {
                        let sa = self.matrix[(ia + ja * da, ka + la * da)];
                        if sa == linalg::ZERO {
                            continue;
                        }
                        for ib in 0..db {
                            for jb in 0..db {
                                for kb in 0..db {
                                    for lb in 0..db {
                                        let sb = other.matrix[(ib + jb * db, kb + lb * db)];
                                        m[(joint(ia, ib, ja, jb), joint(ka, kb, la, lb))] = sa * sb;
                                    }
                                }
                            }
                        }
                    }
                }
            }
        }
        Superoperator { matrix: m, dim: d }
    }
}

/// Unnormalized Choi matrix, reference ⊗ system ordering, trace `d` for a
/// trace-preserving map.
#[derive(Debug, Clone, PartialEq)]
pub struct ChoiMatrix {
    matrix: CMatrix,
    dim: usize,
}

impl ChoiMatrix {
    pub fn new(matrix: CMatrix) -> Result<Self> {
        let s = Superoperator::new(matrix)?;
        Ok(Self {
            dim: s.dim,
            matrix: s.matrix,
        })
    }

    pub fn matrix(&self) -> &CMatrix {
        &self.matrix
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn to_superoperator(&self) -> Superoperator {
        Superoperator {
            matrix: reshuffle_matrix(&self.matrix, self.dim),
            dim: self.dim,
        }
    }

    /// Eigenvalues (descending) and eigenvectors of the Hermitian part.
    pub fn eigen(&self) -> (Vec<f64>, CMatrix) {
        eigh_desc(&self.matrix)
    }
}

/// The maximally entangled vector `|Ω⟩ = Σ_j |j j⟩` (not normalized).
pub fn omega(d: usize) -> CVector {
    let mut v = CVector::zeros(d * d);
    for j in 0..d {
        v[j * d + j] = linalg::ONE;
    }
    v
}

/// `out[α·d + β, γ·d + δ] = m[β + δ·d, α + γ·d]`; an involution.
pub fn reshuffle_matrix(m: &CMatrix, d: usize) -> CMatrix {
    CMatrix::from_fn(d * d, d * d, |row, col| {
        let (alpha, beta) = (row / d, row % d);
        let (gamma, delta) = (col / d, col % d);
        m[(beta + delta * d, alpha + gamma * d)]
    })
}

/// Choi matrix of a superoperator.
pub fn reshuffle(s: &Superoperator) -> ChoiMatrix {
    ChoiMatrix {
        matrix: reshuffle_matrix(&s.matrix, s.dim),
        dim: s.dim,
    }
}

/// A set of Kraus operators of common dimension `d`.
#[derive(Debug, Clone, PartialEq)]
pub struct KrausSet {
    ops: Vec<CMatrix>,
    dim: usize,
}

impl KrausSet {
    pub fn new(ops: Vec<CMatrix>) -> Result<Self> {
        let first = ops
            .first()
            .ok_or_else(|| DilateError::InvalidInput("empty Kraus set".into()))?;
        let dim = first.nrows();
        if ops.iter().any(|m| m.nrows() != dim || m.ncols() != dim) {
            return Err(DilateError::Dimension(
                "Kraus operators must all be d x d".into(),
            ));
        }
        Ok(Self { ops, dim })
    }

    pub fn ops(&self) -> &[CMatrix] {
        &self.ops
    }

    pub fn rank(&self) -> usize {
        self.ops.len()
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    /// `max |Σ M_k† M_k − 𝟙|`
    pub fn completeness_residual(&self) -> f64 {
        let sum = self
            .ops
            .iter()
            .fold(CMatrix::zeros(self.dim, self.dim), |acc, m| {
                acc + m.adjoint() * m
            });
        max_abs(&(sum - identity(self.dim)))
    }

    pub fn apply(&self, rho: &CMatrix) -> CMatrix {
        self.ops
            .iter()
            .fold(CMatrix::zeros(self.dim, self.dim), |acc, m| {
                acc + m * rho * m.adjoint()
            })
    }
}

/// `Σ_k conj(M_k) ⊗ M_k`.
pub fn kraus_to_superop(k: &KrausSet) -> Superoperator {
    let d = k.dim;
    let matrix = k.ops.iter().fold(CMatrix::zeros(d * d, d * d), |acc, m| {
        acc + kron(&m.map(|z| z.conj()), m)
    });
    Superoperator { matrix, dim: d }
}

/// Canonical Kraus set from a Choi matrix: one operator `√λ · unvec(v)` per
/// eigenvalue above `threshold`.
pub fn kraus_from_choi(choi: &ChoiMatrix, threshold: f64) -> KrausSet {
    let d = choi.dim;
    let (vals, vecs) = choi.eigen();
    let mut ops: Vec<CMatrix> = vals
        .iter()
        .enumerate()
        .filter(|(_, &l)| l > threshold)
        .map(|(k, &l)| {
            let col: Vec<_> = vecs.column(k).iter().copied().collect();
            unvec_col(&col, d) * c(l.sqrt(), 0.0)
        })
        .collect();
    if ops.is_empty() {
        ops.push(CMatrix::zeros(d, d));
    }
    KrausSet { ops, dim: d }
}

/// `½‖a − b‖₁`.
pub fn trace_distance(a: &DensityMatrix, b: &DensityMatrix) -> f64 {
    trace_distance_matrices(&a.0, &b.0)
}

pub fn trace_distance_matrices(a: &CMatrix, b: &CMatrix) -> f64 {
    let diff = hermitian_part(&(a - b));
    0.5 * diff
        .symmetric_eigenvalues()
        .iter()
        .map(|l| l.abs())
        .sum::<f64>()
}

/// Outcome of [`validate_cptp`].
#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize)]
pub struct CptpReport {
    pub is_cp: bool,
    pub is_tp: bool,
    /// Smallest eigenvalue of the Hermitized Choi matrix.
    pub min_choi_eigenvalue: f64,
    /// `max |Tr_out Λ − 𝟙|`
    pub tp_residual: f64,
    /// `max |Λ − Λ†|`
    pub hermiticity_residual: f64,
}

impl CptpReport {
    pub fn is_cptp(&self) -> bool {
        self.is_cp && self.is_tp
    }
}

pub fn validate_cptp(s: &Superoperator, tol: f64) -> CptpReport {
    let choi = reshuffle(s);
    let min = min_eigenvalue(&choi.matrix);
    let herm = hermiticity_residual(&choi.matrix);
    let tp = partial_trace_second(&choi.matrix, s.dim, s.dim)
        .map(|m| max_abs(&(m - identity(s.dim))))
        .unwrap_or(f64::INFINITY);
    CptpReport {
        is_cp: min >= -tol && herm <= tol,
        is_tp: tp <= tol,
        min_choi_eigenvalue: min,
        tp_residual: tp,
        hermiticity_residual: herm,
    }
}
