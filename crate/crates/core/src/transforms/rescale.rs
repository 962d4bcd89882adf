use serde::Serialize;

use crate::channel::DensityMatrix;
use crate::dilation::{factorize, DilationPath};
use crate::error::{DilateError, Result};
use crate::generators::TimeGrid;
use crate::linalg::{c, eigh_desc, kron, operator_norm, partial_trace_second, CMatrix, CVector};
use crate::numerics::{cumulative_integral, interpolate_scalar};
use crate::verify::{evolve_dilated, ConstantHamiltonian, EvolveOptions};

#[derive(Debug, Clone, Copy)]
pub struct RescaleOptions {
    /// Strength of the constant Hamiltonian `h₀X` that replaces `h(t)X`.
    pub h0: f64,
    /// Allowed deviation of `H` from `h(t)·X`, relative to `1 + ‖H‖`.
    pub factor_tol: f64,
    /// The integral of `h` starts at the first grid point at or after this
    /// time (and never before `H` is defined); before it `τ` is read off `U`.
    pub anchor_time: f64,
}

impl Default for RescaleOptions {
    fn default() -> Self {
        Self {
            h0: 1.0,
            factor_tol: 1e-6,
            anchor_time: 0.0,
        }
    }
}

/// `τ(t) = (1/h₀)∫₀ᵗ h`, so that `U(t) = exp(−ih₀Xτ(t)) U(t_start)`.
#[derive(Debug, Clone, Serialize)]
pub struct RescaleMap {
    pub grid: TimeGrid,
    #[serde(skip)]
    pub x: CMatrix,
    #[serde(skip)]
    pub base_unitary: CMatrix,
    pub h: Vec<f64>,
    pub h0: f64,
    pub tau: Vec<f64>,
    pub anchor_index: usize,
    /// `max_n ‖U(t_n) − exp(−ih₀Xτ_n)U(t_start)‖`
    pub max_unitary_residual: f64,
}

struct Spectral {
    values: Vec<f64>,
    vectors: CMatrix,
}

impl Spectral {
    fn of(x: &CMatrix) -> Self {
        let (values, vectors) = eigh_desc(x);
        Self { values, vectors }
    }

    fn exp(&self, phi: f64) -> CMatrix {
        let diag = CVector::from_iterator(
            self.values.len(),
            self.values
                .iter()
                .map(|&v| num_complex::Complex64::from_polar(1.0, -v * phi)),
        );
        &self.vectors * CMatrix::from_diagonal(&diag) * self.vectors.adjoint()
    }

    /// `φ` with `V ≈ exp(−iφX)`, from the eigenvector of `X` with the
    /// largest `|x|`; valid while `|φ·x| < π`.
    fn angle(&self, v: &CMatrix) -> f64 {
        let (k, x) = self
            .values
            .iter()
            .copied()
            .enumerate()
            .fold((0, 0.0), |best, (i, x)| {
                if x.abs() > f64::abs(best.1) {
                    (i, x)
                } else {
                    best
                }
            });
        let e = self.vectors.column(k);
        -(e.dotc(&(v * e))).arg() / x
    }
}

/// Factor `H(t) = h(t)X` with `‖X‖ = 1` and tabulate `τ(t)`.
pub fn rescale_time(dp: &DilationPath, opts: RescaleOptions) -> Result<RescaleMap> {
    if !(opts.h0 > 0.0 && opts.h0.is_finite()) {
        return Err(DilateError::InvalidInput(format!(
            "h0 must be positive, got {}",
            opts.h0
        )));
    }
    let f = factorize(dp, opts.factor_tol)?;
    let spec = Spectral::of(&f.x);
    let grid = dp.grid;
    let anchor = grid
        .index_at_or_after(opts.anchor_time)
        .unwrap_or(grid.n_steps)
        .max(dp.first_defined);
    let base = dp.unitaries[0].clone();
    let mut tau = vec![0.0; grid.len()];
    for (n, slot) in tau.iter_mut().enumerate().take(anchor + 1).skip(1) {
        *slot = spec.angle(&(&dp.unitaries[n] * base.adjoint())) / opts.h0;
    }
    let integral = cumulative_integral(&f.h[anchor..], grid.dt());
    for (k, v) in integral.iter().enumerate().skip(1) {
        tau[anchor + k] = tau[anchor] + v / opts.h0;
    }
    let mut worst: f64 = 0.0;
    for (n, t) in tau.iter().enumerate() {
        let r = operator_norm(&(&dp.unitaries[n] - spec.exp(opts.h0 * t) * &base));
        worst = worst.max(r);
    }
    if worst > opts.factor_tol.sqrt() {
        let (index, _) = tau
            .iter()
            .enumerate()
            .map(|(n, t)| {
                (
                    n,
                    operator_norm(&(&dp.unitaries[n] - spec.exp(opts.h0 * t) * &base)),
                )
            })
            .fold((0, 0.0), |b, (n, r)| if r > b.1 { (n, r) } else { b });
        return Err(DilateError::NonFactorable {
            index,
            t: grid.time(index),
            residual: worst,
        });
    }
    Ok(RescaleMap {
        grid,
        x: f.x,
        base_unitary: base,
        h: f.h,
        h0: opts.h0,
        tau,
        anchor_index: anchor,
        max_unitary_residual: worst,
    })
}

impl RescaleMap {
    /// `τ` at any `t` inside the grid, by interpolation.
    pub fn tau_at(&self, t: f64) -> f64 {
        interpolate_scalar(&self.tau, self.grid.t_start, self.grid.dt(), t)
    }

    pub fn final_tau(&self) -> f64 {
        *self.tau.last().expect("grid is non-empty")
    }

    /// Reduced states after evolving under the constant `h₀X` for `τ(t)` at
    /// each requested `t`, with `dtau` as the largest RK4 step.
    pub fn rescaled_states(
        &self,
        rho0: &DensityMatrix,
        times: &[f64],
        dtau: f64,
    ) -> Result<Vec<CMatrix>> {
        let d = rho0.dim();
        let source = ConstantHamiltonian {
            matrix: &self.x * c(self.h0, 0.0),
            system_dim: d,
        };
        times
            .iter()
            .map(|&t| {
                let target = self.tau_at(t);
                if target <= 0.0 {
                    let r = self.base_unitary.nrows() / d;
                    let mut anc = CMatrix::zeros(r, r);
                    anc[(0, 0)] = c(1.0, 0.0);
                    let full = &self.base_unitary
                        * kron(rho0.matrix(), &anc)
                        * self.base_unitary.adjoint();
                    return partial_trace_second(&full, d, r);
                }
                let steps = (target / dtau).ceil().max(1.0) as usize;
                let g = TimeGrid::new(0.0, target, steps)?;
                let opts = EvolveOptions {
                    initial_unitary: Some(self.base_unitary.clone()),
                    ..Default::default()
                };
                Ok(evolve_dilated(&source, rho0, &g, &opts)?
                    .reduced
                    .states
                    .pop()
                    .expect("non-empty"))
            })
            .collect()
    }
}
