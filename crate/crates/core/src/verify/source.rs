use std::collections::BTreeMap;

use crate::channel::DensityMatrix;
use crate::dilation::DilationPath;
use crate::error::{DilateError, Result};
use crate::generators::{StatePath, TimeGrid};
use crate::linalg::{
    c, identity, kron, partial_trace_second, polar_unitary, unitarity_residual, CMatrix, I,
};
use crate::numerics::interpolate;

/// A time-dependent Hamiltonian on system ⊗ ancilla.
pub trait HamiltonianSource: Sync {
    fn system_dim(&self) -> usize;
    fn ancilla_dim(&self) -> usize;

    fn total_dim(&self) -> usize {
        self.system_dim() * self.ancilla_dim()
    }

    fn hamiltonian(&self, t: f64) -> Result<CMatrix>;

    /// Optional split `H = G + B` where `W(t)`, the solution of
    /// `Ẇ = −iG W` with `W(0) = 𝟙`, is known in closed form and `B` is
    /// bounded. Returns `(W(t), B(t))`.
    fn split(&self, _t: f64) -> Option<Result<(CMatrix, CMatrix)>> {
        None
    }
}

/// Hamiltonian sampled on a grid, read back by degree-7 interpolation.
#[derive(Debug, Clone, Copy)]
pub struct SampledPath<'a> {
    path: &'a DilationPath,
}

impl<'a> SampledPath<'a> {
    pub fn new(path: &'a DilationPath) -> Self {
        Self { path }
    }
}

impl HamiltonianSource for SampledPath<'_> {
    fn system_dim(&self) -> usize {
        self.path.system_dim
    }

    fn ancilla_dim(&self) -> usize {
        self.path.ancilla_dim
    }

    fn hamiltonian(&self, t: f64) -> Result<CMatrix> {
        let grid = &self.path.grid;
        let first = self.path.first_defined;
        let t0 = grid.time(first);
        let slack = 1e-9 * grid.dt();
        if t < t0 - slack {
            return Err(DilateError::Divergent { t });
        }
        if t > grid.t_end + slack {
            return Err(DilateError::GridMismatch(format!(
                "t = {t} lies beyond the sampled path (t_end = {})",
                grid.t_end
            )));
        }
        Ok(interpolate(
            &self.path.hamiltonians[first..],
            t0,
            grid.dt(),
            t,
        ))
    }
}

/// A constant Hamiltonian.
#[derive(Debug, Clone)]
pub struct ConstantHamiltonian {
    pub matrix: CMatrix,
    pub system_dim: usize,
}

impl HamiltonianSource for ConstantHamiltonian {
    fn system_dim(&self) -> usize {
        self.system_dim
    }

    fn ancilla_dim(&self) -> usize {
        self.matrix.nrows() / self.system_dim
    }

    fn hamiltonian(&self, _t: f64) -> Result<CMatrix> {
        Ok(self.matrix.clone())
    }
}

#[derive(Debug, Clone)]
pub struct EvolveOptions {
    /// `U(t_start)`; identity when absent.
    pub initial_unitary: Option<CMatrix>,
    /// Integrate `V = W†U` with the source's split instead of `U` directly.
    pub interaction_picture: bool,
    /// RK4 steps per grid interval.
    pub substeps: usize,
    /// Polar re-projection happens when `‖UU† − 𝟙‖` exceeds `tol / 10`.
    pub unitarity_tol: f64,
    pub keep_full_states: bool,
    pub keep_unitaries: bool,
}

impl Default for EvolveOptions {
    fn default() -> Self {
        Self {
            initial_unitary: None,
            interaction_picture: false,
            substeps: 1,
            unitarity_tol: 1e-10,
            keep_full_states: false,
            keep_unitaries: false,
        }
    }
}

/// Reduced and (optionally) full dynamics of a dilation.
#[derive(Debug, Clone)]
pub struct SimulationResult {
    pub reduced: StatePath,
    pub full_states: Option<Vec<CMatrix>>,
    pub unitaries: Option<Vec<CMatrix>>,
    pub observables: BTreeMap<String, Vec<f64>>,
    pub reunitarizations: usize,
}

fn rk4<F>(f: &F, t: f64, h: f64, y: &CMatrix) -> Result<CMatrix>
where
    F: Fn(f64, &CMatrix) -> Result<CMatrix>,
{
    let half = c(0.5 * h, 0.0);
    let k1 = f(t, y)?;
    let k2 = f(t + 0.5 * h, &(y + &k1 * half))?;
    let k3 = f(t + 0.5 * h, &(y + &k2 * half))?;
    let k4 = f(t + h, &(y + &k3 * c(h, 0.0)))?;
    Ok(y + (k1 + (k2 + k3) * c(2.0, 0.0) + k4) * c(h / 6.0, 0.0))
}

/// Integrate `U̇ = −iH(t)U` by RK4 on `grid` and trace out the ancilla,
/// which starts in `|0⟩⟨0|`.
pub fn evolve_dilated(
    source: &dyn HamiltonianSource,
    rho0: &DensityMatrix,
    grid: &TimeGrid,
    opts: &EvolveOptions,
) -> Result<SimulationResult> {
    grid.validate()?;
    let (d, r) = (source.system_dim(), source.ancilla_dim());
    let n = d * r;
    if rho0.dim() != d {
        return Err(DilateError::Dimension(format!(
            "state is {}-dimensional, system {d}",
            rho0.dim()
        )));
    }
    if opts.substeps == 0 {
        return Err(DilateError::InvalidInput(
            "substeps must be at least 1".into(),
        ));
    }
    let mut omega = CMatrix::zeros(r, r);
    omega[(0, 0)] = c(1.0, 0.0);
    let full0 = kron(rho0.matrix(), &omega);
    let u0 = opts.initial_unitary.clone().unwrap_or_else(|| identity(n));
    if u0.shape() != (n, n) {
        return Err(DilateError::Dimension(format!(
            "initial unitary is {:?}, expected {n}x{n}",
            u0.shape()
        )));
    }

    let frame = |t: f64| -> Result<(CMatrix, CMatrix)> {
        source.split(t).unwrap_or_else(|| {
            Err(DilateError::InvalidInput(
                "source offers no interaction-picture split".into(),
            ))
        })
    };
    let rhs = |t: f64, y: &CMatrix| -> Result<CMatrix> {
        if opts.interaction_picture {
            let (w, b) = frame(t)?;
            Ok(w.adjoint() * b * w * y * (-I))
        } else {
            Ok(source.hamiltonian(t)? * y * (-I))
        }
    };
    let to_lab = |t: f64, y: &CMatrix| -> Result<CMatrix> {
        if opts.interaction_picture {
            Ok(frame(t)?.0 * y)
        } else {
            Ok(y.clone())
        }
    };

    let mut y = if opts.interaction_picture {
        frame(grid.t_start)?.0.adjoint() * &u0
    } else {
        u0
    };
    let mut reduced = Vec::with_capacity(grid.len());
    let mut full_states = opts
        .keep_full_states
        .then(|| Vec::with_capacity(grid.len()));
    let mut unitaries = opts.keep_unitaries.then(|| Vec::with_capacity(grid.len()));
    let mut reunitarizations = 0;
    let threshold = opts.unitarity_tol / 10.0;

    for k in 0..grid.len() {
        if k > 0 {
            let (ta, tb) = (grid.time(k - 1), grid.time(k));
            let h = (tb - ta) / opts.substeps as f64;
            for s in 0..opts.substeps {
                y = rk4(&rhs, ta + s as f64 * h, h, &y).map_err(|e| match e {
                    DilateError::Divergent { t } => DilateError::Divergent { t },
                    other => DilateError::InvalidInput(format!(
                        "evolution failed at grid point {k} (t = {tb}): {other}"
                    )),
                })?;
            }
            if unitarity_residual(&y) > threshold {
                y = polar_unitary(&y);
                reunitarizations += 1;
            }
        }
        let u = to_lab(grid.time(k), &y)?;
        let full = &u * &full0 * u.adjoint();
        reduced.push(partial_trace_second(&full, d, r)?);
        if let Some(f) = full_states.as_mut() {
            f.push(full);
        }
        if let Some(us) = unitaries.as_mut() {
            us.push(u);
        }
    }
    if reunitarizations > 0 {
        log::info!("evolve_dilated: {reunitarizations} polar re-unitarizations");
    }
    let mut observables = BTreeMap::new();
    observables.insert(
        "trace".to_string(),
        reduced.iter().map(|s| s.trace().re).collect(),
    );
    observables.insert(
        "purity".to_string(),
        reduced.iter().map(|s| (s * s).trace().re).collect(),
    );
    for level in 0..d {
        observables.insert(
            format!("population_{level}"),
            reduced.iter().map(|s| s[(level, level)].re).collect(),
        );
    }
    Ok(SimulationResult {
        reduced: StatePath {
            grid: *grid,
            states: reduced,
        },
        full_states,
        unitaries,
        observables,
        reunitarizations,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::{max_abs, pauli, CVector, ONE};

    #[test]
    fn zero_hamiltonian_keeps_state() {
        let rho = DensityMatrix::pure(&CVector::from_vec(vec![ONE, c(0.0, 1.0)]));
        let src = ConstantHamiltonian {
            matrix: CMatrix::zeros(4, 4),
            system_dim: 2,
        };
        let grid = TimeGrid::new(0.0, 1.0, 10).unwrap();
        let out = evolve_dilated(&src, &rho, &grid, &EvolveOptions::default()).unwrap();
        assert!(out
            .reduced
            .states
            .iter()
            .all(|s| max_abs(&(s - rho.matrix())) < 1e-15));
    }

    #[test]
    fn swap_like_exchange_transfers_population() {
        // i(σ−⊗σ+ − σ+⊗σ−) rotates |1,0⟩ into |0,1⟩
        let x = (kron(&pauli::minus(), &pauli::plus()) - kron(&pauli::plus(), &pauli::minus())) * I;
        let src = ConstantHamiltonian {
            matrix: x,
            system_dim: 2,
        };
        let grid = TimeGrid::new(0.0, 1.0, 1000).unwrap();
        let opts = EvolveOptions {
            keep_full_states: true,
            ..Default::default()
        };
        let out = evolve_dilated(&src, &DensityMatrix::basis(2, 1), &grid, &opts).unwrap();
        for (k, s) in out.reduced.states.iter().enumerate() {
            let t = grid.time(k);
            assert!((s[(1, 1)].re - t.cos().powi(2)).abs() < 1e-12);
        }
        for f in out.full_states.unwrap() {
            assert!(((&f * &f).trace().re - 1.0).abs() < 1e-12);
        }
    }
}
