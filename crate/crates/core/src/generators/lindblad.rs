use crate::channel::{validate_cptp, DensityMatrix, Superoperator};
use crate::error::{DilateError, Result};
use crate::generators::TimeProfile;
use crate::linalg::{c, hermiticity_residual, identity, kron, CMatrix, I};

/// Hermitian operator with a scalar time profile.
#[derive(Debug, Clone, PartialEq)]
pub struct HamiltonianTerm {
    pub matrix: CMatrix,
    pub profile: TimeProfile,
}

/// Jump operator `L_j` with rate `γ_j(t)`. Negative rates are allowed.
#[derive(Debug, Clone, PartialEq)]
pub struct JumpTerm {
    pub operator: CMatrix,
    pub rate: TimeProfile,
}

/// Time-dependent Lindbladian
/// `ρ̇ = −i[H(t), ρ] + Σ_j γ_j(t) (L_j ρ L_j† − ½{L_j† L_j, ρ})`.
#[derive(Debug, Clone, PartialEq)]
pub struct LindbladSpec {
    dim: usize,
    hamiltonian: Vec<HamiltonianTerm>,
    jumps: Vec<JumpTerm>,
}

impl LindbladSpec {
    pub fn new(
        dim: usize,
        hamiltonian: Vec<HamiltonianTerm>,
        jumps: Vec<JumpTerm>,
    ) -> Result<Self> {
        if dim == 0 {
            return Err(DilateError::InvalidInput(
                "Lindbladian dimension must be positive".into(),
            ));
        }
        for term in &hamiltonian {
            if term.matrix.shape() != (dim, dim) {
                return Err(DilateError::Dimension(format!(
                    "Hamiltonian term is {:?}, expected {dim}x{dim}",
                    term.matrix.shape()
                )));
            }
            let herm = hermiticity_residual(&term.matrix);
            if herm > crate::channel::DEFAULT_TOL {
                return Err(DilateError::InvalidInput(format!(
                    "Hamiltonian term not Hermitian (residual {herm:e})"
                )));
            }
            term.profile.validate()?;
        }
        for term in &jumps {
            if term.operator.shape() != (dim, dim) {
                return Err(DilateError::Dimension(format!(
                    "jump operator is {:?}, expected {dim}x{dim}",
                    term.operator.shape()
                )));
            }
            term.rate.validate()?;
        }
        Ok(Self {
            dim,
            hamiltonian,
            jumps,
        })
    }

    pub fn empty(dim: usize) -> Self {
        Self {
            dim,
            hamiltonian: Vec::new(),
            jumps: Vec::new(),
        }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn hamiltonian_terms(&self) -> &[HamiltonianTerm] {
        &self.hamiltonian
    }

    pub fn jump_terms(&self) -> &[JumpTerm] {
        &self.jumps
    }

    pub fn with_hamiltonian(mut self, matrix: CMatrix, profile: TimeProfile) -> Result<Self> {
        self.hamiltonian.push(HamiltonianTerm { matrix, profile });
        Self::new(self.dim, self.hamiltonian, self.jumps)
    }

    pub fn with_jump(mut self, operator: CMatrix, rate: TimeProfile) -> Result<Self> {
        self.jumps.push(JumpTerm { operator, rate });
        Self::new(self.dim, self.hamiltonian, self.jumps)
    }

    /// Sum of two generators on the same space.
    pub fn plus(&self, other: &LindbladSpec) -> Result<LindbladSpec> {
        if self.dim != other.dim {
            return Err(DilateError::Dimension(
                "cannot add Lindbladians of different dimension".into(),
            ));
        }
        let mut out = self.clone();
        out.hamiltonian.extend(other.hamiltonian.iter().cloned());
        out.jumps.extend(other.jumps.iter().cloned());
        Ok(out)
    }

    /// Every coefficient multiplied by `factor`.
    pub fn scaled(&self, factor: f64) -> LindbladSpec {
        LindbladSpec {
            dim: self.dim,
            hamiltonian: self
                .hamiltonian
                .iter()
                .map(|h| HamiltonianTerm {
                    matrix: h.matrix.clone(),
                    profile: h.profile.scaled(factor),
                })
                .collect(),
            jumps: self
                .jumps
                .iter()
                .map(|j| JumpTerm {
                    operator: j.operator.clone(),
                    rate: j.rate.scaled(factor),
                })
                .collect(),
        }
    }

    pub fn hamiltonian_at(&self, t: f64) -> Result<CMatrix> {
        let mut h = CMatrix::zeros(self.dim, self.dim);
        for term in &self.hamiltonian {
            h += &term.matrix * c(term.profile.eval(t)?, 0.0);
        }
        Ok(h)
    }

    /// Whether all profiles can be evaluated on `[start, end]`.
    pub fn covers(&self, start: f64, end: f64) -> bool {
        self.hamiltonian
            .iter()
            .all(|h| h.profile.covers(start, end))
            && self.jumps.iter().all(|j| j.rate.covers(start, end))
    }

    /// `L_t(ρ)` evaluated with matrix products, independently of the
    /// superoperator form.
    pub fn apply(&self, t: f64, rho: &CMatrix) -> Result<CMatrix> {
        let h = self.hamiltonian_at(t)?;
        let mut out = (&h * rho - rho * &h) * (-I);
        for j in &self.jumps {
            let g = j.rate.eval(t)?;
            if g == 0.0 {
                continue;
            }
            let l = &j.operator;
            let ld = l.adjoint();
            let ldl = &ld * l;
            out += (l * rho * &ld - (&ldl * rho + rho * &ldl) * c(0.5, 0.0)) * c(g, 0.0);
        }
        Ok(out)
    }
}

impl TimeProfile {
    /// The same shape with every value multiplied by `factor`.
    pub fn scaled(&self, factor: f64) -> TimeProfile {
        match self {
            TimeProfile::Constant { value } => TimeProfile::Constant {
                value: value * factor,
            },
            TimeProfile::Exponential {
                amplitude,
                rate,
                offset,
            } => TimeProfile::Exponential {
                amplitude: amplitude * factor,
                rate: *rate,
                offset: offset * factor,
            },
            TimeProfile::Sinusoidal {
                amplitude,
                frequency,
                phase,
                offset,
            } => TimeProfile::Sinusoidal {
                amplitude: amplitude * factor,
                frequency: *frequency,
                phase: *phase,
                offset: offset * factor,
            },
            TimeProfile::Polynomial { coefficients } => TimeProfile::Polynomial {
                coefficients: coefficients.iter().map(|x| x * factor).collect(),
            },
            TimeProfile::Tabulated { times, values } => TimeProfile::Tabulated {
                times: times.clone(),
                values: values.iter().map(|x| x * factor).collect(),
            },
        }
    }
}

/// Matrix of `L_t` acting on column-stacked states.
pub fn lindblad_superop(spec: &LindbladSpec, t: f64) -> Result<Superoperator> {
    let d = spec.dim;
    let id = identity(d);
    let h = spec.hamiltonian_at(t)?;
    let mut m = (kron(&id, &h) - kron(&h.transpose(), &id)) * (-I);
    for j in &spec.jumps {
        let g = j.rate.eval(t)?;
        if g == 0.0 {
            continue;
        }
        let l = &j.operator;
        let ldl = l.adjoint() * l;
        let term = kron(&l.map(|z| z.conj()), l)
            - (kron(&id, &ldl) + kron(&ldl.transpose(), &id)) * c(0.5, 0.0);
        m += term * c(g, 0.0);
    }
    Superoperator::new(m)
}

/// Uniform time grid `t_k = t_start + k·δt`, `k = 0..=n_steps`.
#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct TimeGrid {
    pub t_start: f64,
    pub t_end: f64,
    pub n_steps: usize,
}

impl TimeGrid {
    pub fn new(t_start: f64, t_end: f64, n_steps: usize) -> Result<Self> {
        let grid = Self {
            t_start,
            t_end,
            n_steps,
        };
        grid.validate()?;
        Ok(grid)
    }

    /// Grid from `t_start` with spacing `dt` and `n_steps` steps.
    pub fn with_step(t_start: f64, dt: f64, n_steps: usize) -> Result<Self> {
        Self::new(t_start, t_start + dt * n_steps as f64, n_steps)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.t_start.is_finite() && self.t_end.is_finite()) {
            return Err(DilateError::InvalidInput(
                "grid bounds must be finite".into(),
            ));
        }
        if self.t_start < 0.0 {
            return Err(DilateError::InvalidInput(format!(
                "grid must start at t >= 0, got {}",
                self.t_start
            )));
        }
        if self.n_steps == 0 || self.t_end <= self.t_start {
            return Err(DilateError::InvalidInput(format!(
                "grid needs t_end > t_start and at least one step (got [{}, {}] with {} steps)",
                self.t_start, self.t_end, self.n_steps
            )));
        }
        Ok(())
    }

    pub fn dt(&self) -> f64 {
        (self.t_end - self.t_start) / self.n_steps as f64
    }

    pub fn len(&self) -> usize {
        self.n_steps + 1
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn time(&self, k: usize) -> f64 {
        if k == self.n_steps {
            self.t_end
        } else {
            self.t_start + k as f64 * self.dt()
        }
    }

    pub fn times(&self) -> Vec<f64> {
        (0..self.len()).map(|k| self.time(k)).collect()
    }

    /// First index whose time is `>= t` (up to a rounding slack).
    pub fn index_at_or_after(&self, t: f64) -> Option<usize> {
        let x = ((t - self.t_start) / self.dt() - 1e-9).ceil().max(0.0) as usize;
        (x < self.len()).then_some(x)
    }

    /// The sub-grid starting at index `k`.
    pub fn tail_from(&self, k: usize) -> Result<TimeGrid> {
        if k >= self.n_steps {
            return Err(DilateError::GridMismatch(format!(
                "cannot start a sub-grid at index {k} of {}",
                self.n_steps
            )));
        }
        Ok(TimeGrid {
            t_start: self.time(k),
            t_end: self.t_end,
            n_steps: self.n_steps - k,
        })
    }

    pub fn same_as(&self, other: &TimeGrid) -> bool {
        self.n_steps == other.n_steps
            && (self.t_start - other.t_start).abs() <= 1e-12 * (1.0 + self.t_start.abs())
            && (self.t_end - other.t_end).abs() <= 1e-12 * (1.0 + self.t_end.abs())
    }
}

/// `ε_t` sampled on a grid, always measured from `t = 0`.
#[derive(Debug, Clone, PartialEq)]
pub struct ChannelFamily {
    pub grid: TimeGrid,
    pub superops: Vec<Superoperator>,
}

impl ChannelFamily {
    pub fn dim(&self) -> usize {
        self.superops[0].dim()
    }

    /// Reduced-state path `ε_t(ρ₀)`.
    pub fn apply(&self, rho0: &CMatrix) -> StatePath {
        StatePath {
            grid: self.grid,
            states: self.superops.iter().map(|s| s.apply(rho0)).collect(),
        }
    }
}

/// A sequence of `d × d` states on a grid.
#[derive(Debug, Clone, PartialEq)]
pub struct StatePath {
    pub grid: TimeGrid,
    pub states: Vec<CMatrix>,
}

/// Tuning for [`propagate_channel`].
#[derive(Debug, Clone, Copy)]
pub struct PropagationOptions {
    /// Tolerance for the CPTP check on every propagated channel; `None`
    /// skips validation.
    pub cptp_tol: Option<f64>,
}

impl Default for PropagationOptions {
    fn default() -> Self {
        Self {
            cptp_tol: Some(1e-7),
        }
    }
}

fn rk4_step<F>(f: &F, t: f64, h: f64, y: &CMatrix) -> Result<CMatrix>
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

/// Integrate `y' = f(t, y)` from 0 to `grid.t_start` (in steps no longer than
/// `grid.dt()`), then sample on the grid.
fn integrate_on_grid<F>(f: F, y0: CMatrix, grid: &TimeGrid) -> Result<Vec<CMatrix>>
where
    F: Fn(f64, &CMatrix) -> Result<CMatrix>,
{
    grid.validate()?;
    let dt = grid.dt();
    let mut y = y0;
    if grid.t_start > 0.0 {
        let n_pre = (grid.t_start / dt).ceil().max(1.0) as usize;
        let h = grid.t_start / n_pre as f64;
        for k in 0..n_pre {
            y = rk4_step(&f, k as f64 * h, h, &y)?;
        }
    }
    let mut out = Vec::with_capacity(grid.len());
    out.push(y.clone());
    for k in 0..grid.n_steps {
        let t = grid.time(k);
        let h = grid.time(k + 1) - t;
        y = rk4_step(&f, t, h, &y)?;
        out.push(y.clone());
    }
    Ok(out)
}

/// Time-ordered exponential of the generator, `dE/dt = L_t E`, `E(0) = 𝟙`,
/// by fixed-step RK4.
pub fn propagate_channel(
    spec: &LindbladSpec,
    grid: &TimeGrid,
    opts: PropagationOptions,
) -> Result<ChannelFamily> {
    if !spec.covers(0.0, grid.t_end) {
        return Err(DilateError::InvalidInput(format!(
            "profiles do not cover [0, {}]",
            grid.t_end
        )));
    }
    let d = spec.dim();
    let raw = integrate_on_grid(
        |t, e| Ok(lindblad_superop(spec, t)?.matrix() * e),
        identity(d * d),
        grid,
    )?;
    let superops: Vec<Superoperator> = raw
        .into_iter()
        .map(Superoperator::new)
        .collect::<Result<_>>()?;
    if let Some(tol) = opts.cptp_tol {
        for (k, s) in superops.iter().enumerate() {
            let report = validate_cptp(s, tol);
            if !report.is_cptp() {
                return Err(DilateError::NotCptp {
                    index: k,
                    t: grid.time(k),
                    min_eigenvalue: report.min_choi_eigenvalue,
                    tp_residual: report.tp_residual,
                });
            }
        }
    }
    Ok(ChannelFamily {
        grid: *grid,
        superops,
    })
}

/// Propagator from `t0` to `t1` as one RK4 step of `dE/dt = L_t E` from
/// `E(t0) = 𝟙`. On a grid this is exactly the factor `propagate_channel`
/// applies between neighbouring points.
pub fn step_propagator(spec: &LindbladSpec, t0: f64, t1: f64) -> Result<Superoperator> {
    let d = spec.dim();
    let e = rk4_step(
        &|t, e: &CMatrix| Ok(lindblad_superop(spec, t)?.matrix() * e),
        t0,
        t1 - t0,
        &identity(d * d),
    )?;
    Superoperator::new(e)
}

/// RK4 integration of `ρ̇ = L_t(ρ)` directly on the density matrix; the
/// verification oracle for every dilation.
pub fn evolve_state_master(
    spec: &LindbladSpec,
    rho0: &DensityMatrix,
    grid: &TimeGrid,
) -> Result<StatePath> {
    if rho0.dim() != spec.dim() {
        return Err(DilateError::Dimension(format!(
            "state is {}-dimensional, generator {}",
            rho0.dim(),
            spec.dim()
        )));
    }
    if !spec.covers(0.0, grid.t_end) {
        return Err(DilateError::InvalidInput(format!(
            "profiles do not cover [0, {}]",
            grid.t_end
        )));
    }
    let states = integrate_on_grid(|t, rho| spec.apply(t, rho), rho0.matrix().clone(), grid)?;
    for (k, s) in states.iter().enumerate() {
        let drift = (s.trace().re - 1.0).abs();
        if drift > 1e-8 {
            return Err(DilateError::TraceDrift {
                index: k,
                t: grid.time(k),
                drift,
            });
        }
    }
    Ok(StatePath {
        grid: *grid,
        states,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::generators::presets;
    use crate::linalg::{max_abs, pauli, vec_col, CVector, ONE};

    fn plus_state() -> DensityMatrix {
        DensityMatrix::pure(&CVector::from_vec(vec![ONE, ONE]))
    }

    #[test]
    fn empty_spec_gives_zero_generator() {
        let s = lindblad_superop(&LindbladSpec::empty(3), 0.4).unwrap();
        assert_eq!(max_abs(s.matrix()), 0.0);
    }

    #[test]
    fn superop_matches_direct_application() {
        let spec = presets::amplitude_damping(0.3, 1.1)
            .plus(&presets::driven_damping(0.0, 0.2))
            .unwrap();
        let rho =
            CMatrix::from_row_slice(2, 2, &[c(0.6, 0.0), c(0.1, 0.3), c(0.1, -0.3), c(0.4, 0.0)]);
        let l = lindblad_superop(&spec, 0.7).unwrap();
        let lhs = l.matrix() * vec_col(&rho);
        let rhs = vec_col(&spec.apply(0.7, &rho).unwrap());
        assert!((lhs - rhs).camax() < 1e-14);
    }

    #[test]
    fn double_commutator_dephasing_scales_coherences() {
        let gamma = 0.35;
        let l = lindblad_superop(&presets::dephasing(gamma), 0.0).unwrap();
        for a in 0..2 {
            for b in 0..2 {
                let mut e = CMatrix::zeros(2, 2);
                e[(a, b)] = ONE;
                let out = l.apply(&e);
                let factor = if a == b { 0.0 } else { -4.0 * gamma };
                assert!(max_abs(&(out - e * c(factor, 0.0))) < 1e-14);
            }
        }
    }

    #[test]
    fn hamiltonian_generator_is_a_commutator() {
        let spec = LindbladSpec::empty(2)
            .with_hamiltonian(pauli::x() * c(0.7, 0.0), TimeProfile::constant(1.0))
            .unwrap();
        let rho =
            CMatrix::from_row_slice(2, 2, &[c(0.3, 0.0), c(0.2, 0.1), c(0.2, -0.1), c(0.7, 0.0)]);
        let out = lindblad_superop(&spec, 0.0).unwrap().apply(&rho);
        let h = pauli::x() * c(0.7, 0.0);
        assert!(max_abs(&(&out - (&h * &rho - &rho * &h) * (-I))) < 1e-15);
        assert!(out.trace().norm() < 1e-15);
        assert!(max_abs(&(&out - out.adjoint())) < 1e-15);
    }

    #[test]
    fn zero_generator_propagates_identity() {
        let grid = TimeGrid::new(0.0, 1.0, 10).unwrap();
        let fam = propagate_channel(
            &LindbladSpec::empty(2),
            &grid,
            PropagationOptions::default(),
        )
        .unwrap();
        assert!(fam
            .superops
            .iter()
            .all(|s| max_abs(&(s.matrix() - identity(4))) == 0.0));
        let path = evolve_state_master(&LindbladSpec::empty(2), &plus_state(), &grid).unwrap();
        assert!(path.states.iter().all(|s| s == plus_state().matrix()));
    }

    #[test]
    fn constant_dephasing_coherence_decay() {
        let gamma = 1.0;
        let grid = TimeGrid::new(0.0, 3.0, 3000).unwrap();
        let fam = propagate_channel(
            &presets::dephasing(gamma),
            &grid,
            PropagationOptions::default(),
        )
        .unwrap();
        let mut e01 = CMatrix::zeros(2, 2);
        e01[(0, 1)] = ONE;
        for (k, s) in fam.superops.iter().enumerate() {
            let t = grid.time(k);
            let coh = s.apply(&e01)[(0, 1)];
            assert!((coh.re - (-4.0 * gamma * t).exp()).abs() < 1e-8);
        }
    }

    #[test]
    fn amplitude_damping_population_decay() {
        let gamma = 0.5;
        let grid = TimeGrid::new(0.0, 6.0, 3000).unwrap();
        let fam = propagate_channel(
            &presets::amplitude_damping(gamma, 0.0),
            &grid,
            PropagationOptions::default(),
        )
        .unwrap();
        let excited = DensityMatrix::basis(2, 1);
        for (k, s) in fam.superops.iter().enumerate() {
            let p1 = s.apply(excited.matrix())[(1, 1)].re;
            assert!((p1 - (-2.0 * gamma * grid.time(k)).exp()).abs() < 1e-9);
        }
    }

    #[test]
    fn dephasing_plus_state_survival() {
        let gamma = 0.8;
        let grid = TimeGrid::new(0.0, 2.0, 2000).unwrap();
        let path = evolve_state_master(&presets::dephasing(gamma), &plus_state(), &grid).unwrap();
        let plus = CVector::from_vec(vec![c(std::f64::consts::FRAC_1_SQRT_2, 0.0); 2]);
        for (k, rho) in path.states.iter().enumerate() {
            let survival = (plus.adjoint() * rho * &plus)[(0, 0)].re;
            let expected = 0.5 * (1.0 + (-4.0 * gamma * grid.time(k)).exp());
            assert!((survival - expected).abs() < 1e-10);
        }
    }

    #[test]
    fn dephasing_family_is_cptp_throughout() {
        let grid = TimeGrid::new(0.0, 2.0, 200).unwrap();
        let fam = propagate_channel(
            &presets::dephasing(1.3),
            &grid,
            PropagationOptions { cptp_tol: None },
        )
        .unwrap();
        for s in &fam.superops {
            assert!(validate_cptp(s, crate::channel::DEFAULT_TOL).is_cptp());
        }
    }

    #[test]
    fn late_start_grid_measures_from_zero() {
        let full = TimeGrid::new(0.0, 2.0, 200).unwrap();
        let tail = full.tail_from(50).unwrap();
        let spec = presets::amplitude_damping(0.4, 1.0);
        let a = propagate_channel(&spec, &full, PropagationOptions::default()).unwrap();
        let b = propagate_channel(&spec, &tail, PropagationOptions::default()).unwrap();
        assert!(max_abs(&(a.superops[60].matrix() - b.superops[10].matrix())) < 1e-12);
    }

    #[test]
    fn non_cp_family_is_rejected() {
        // a strongly negative rate drives the channel out of the CP cone
        let spec = LindbladSpec::empty(2)
            .with_jump(pauli::z(), TimeProfile::constant(-1.0))
            .unwrap();
        let grid = TimeGrid::new(0.0, 1.0, 100).unwrap();
        let err = propagate_channel(&spec, &grid, PropagationOptions::default()).unwrap_err();
        assert!(matches!(err, DilateError::NotCptp { index: 1, .. }));
    }

    #[test]
    fn grid_validation() {
        assert!(TimeGrid::new(0.0, 1.0, 0).is_err());
        assert!(TimeGrid::new(1.0, 1.0, 4).is_err());
        assert!(TimeGrid::new(-0.5, 1.0, 4).is_err());
        let g = TimeGrid::new(0.0, 1.0, 4).unwrap();
        assert_eq!(g.times(), vec![0.0, 0.25, 0.5, 0.75, 1.0]);
        assert_eq!(g.index_at_or_after(0.3), Some(2));
        assert_eq!(g.index_at_or_after(0.5), Some(2));
    }
}
