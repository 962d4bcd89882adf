use crate::dilation::UnitaryPath;
use crate::generators::TimeGrid;
use crate::linalg::{anti_hermitian_part, hermitian_part, operator_norm, CMatrix, I};
use crate::numerics::{derivative_stencil, DERIVATIVE_POINTS};

/// Unitary and Hamiltonian paths of a dilation. The ancilla starts in
/// `|0⟩⟨0|`.
#[derive(Debug, Clone)]
pub struct DilationPath {
    pub grid: TimeGrid,
    pub system_dim: usize,
    pub ancilla_dim: usize,
    pub unitaries: Vec<CMatrix>,
    pub hamiltonians: Vec<CMatrix>,
    /// `‖(H − H†)/2‖` before Hermitization, per grid point.
    pub anti_hermitian_residual: Vec<f64>,
    /// First grid index at which `H` is meaningful; entries before it are
    /// zero placeholders.
    pub first_defined: usize,
}

impl DilationPath {
    pub fn total_dim(&self) -> usize {
        self.system_dim * self.ancilla_dim
    }

    pub fn hamiltonian_norms(&self) -> Vec<f64> {
        self.hamiltonians.iter().map(operator_norm).collect()
    }

    pub fn max_hamiltonian_norm(&self) -> f64 {
        self.hamiltonians[self.first_defined..]
            .iter()
            .map(operator_norm)
            .fold(0.0, f64::max)
    }
}

/// `H = i U̇ U†`, Hermitized, with `U̇` from a 9-point finite-difference
/// stencil (centred in the interior, one-sided near the ends).
///
/// When `divergent_at_start` is set, `H(t_start)` does not exist and the
/// stencils that would reach back to the first sample are shifted forward so
/// that they only use points with `t > t_start`.
pub fn hamiltonian_from_unitary(up: &UnitaryPath, divergent_at_start: bool) -> DilationPath {
    let len = up.unitaries.len();
    let dt = up.grid.dt();
    let n = up.total_dim();
    let first_defined = usize::from(divergent_at_start);
    let mut hamiltonians = Vec::with_capacity(len);
    let mut residuals = Vec::with_capacity(len);
    for idx in 0..len {
        if idx < first_defined {
            hamiltonians.push(CMatrix::zeros(n, n));
            residuals.push(0.0);
            continue;
        }
        let offset =
            first_defined.min(len.saturating_sub(DERIVATIVE_POINTS.min(len - first_defined)));
        let (start, w) = derivative_stencil(idx - offset, len - offset, dt);
        let mut du = CMatrix::zeros(n, n);
        for (k, wk) in w.iter().enumerate() {
            du += &up.unitaries[offset + start + k] * num_complex::Complex64::new(*wk, 0.0);
        }
        let raw = du * up.unitaries[idx].adjoint() * I;
        residuals.push(operator_norm(&anti_hermitian_part(&raw)));
        hamiltonians.push(hermitian_part(&raw));
    }
    DilationPath {
        grid: up.grid,
        system_dim: up.system_dim,
        ancilla_dim: up.ancilla_dim,
        unitaries: up.unitaries.clone(),
        hamiltonians,
        anti_hermitian_residual: residuals,
        first_defined,
    }
}
