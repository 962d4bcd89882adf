use crate::dilation::KrausFamily;
use crate::error::{DilateError, Result};
use crate::generators::TimeGrid;
use crate::linalg::{identity, unitarity_residual, CMatrix, CVector};

/// Unitary path on system ⊗ ancilla, basis index `i·R + k` for system level
/// `i` and ancilla level `k`.
#[derive(Debug, Clone)]
pub struct UnitaryPath {
    pub grid: TimeGrid,
    pub system_dim: usize,
    pub ancilla_dim: usize,
    pub unitaries: Vec<CMatrix>,
    /// `max_col ‖col(t_{n+1}) − col(t_n)‖` over the completion columns, one
    /// entry per step.
    pub completion_steps: Vec<f64>,
}

impl UnitaryPath {
    pub fn total_dim(&self) -> usize {
        self.system_dim * self.ancilla_dim
    }

    pub fn max_unitarity_residual(&self) -> f64 {
        self.unitaries
            .iter()
            .map(unitarity_residual)
            .fold(0.0, f64::max)
    }

    /// `max_{n,k} max |⟨k_B|U(t_n)|0_B⟩ − M_k(t_n)|`
    pub fn max_constraint_residual(&self, kf: &KrausFamily) -> f64 {
        let (d, r) = (self.system_dim, self.ancilla_dim);
        let mut worst: f64 = 0.0;
        for (u, ops) in self.unitaries.iter().zip(&kf.ops) {
            for (k, m) in ops.iter().enumerate() {
                for i in 0..d {
                    for j in 0..d {
                        worst = worst.max((u[(i * r + k, j * r)] - m[(i, j)]).norm());
                    }
                }
            }
        }
        worst
    }

    /// Kraus operators read back from the `|0_B⟩` columns.
    pub fn kraus_at(&self, n: usize) -> Vec<CMatrix> {
        let (d, r) = (self.system_dim, self.ancilla_dim);
        let u = &self.unitaries[n];
        (0..r)
            .map(|k| CMatrix::from_fn(d, d, |i, j| u[(i * r + k, j * r)]))
            .collect()
    }
}

/// Smoothness and breakdown settings for [`complete_unitary`].
#[derive(Debug, Clone)]
pub struct CompletionOptions {
    /// Vectors tried in order when building the first completion; `None`
    /// means the computational basis.
    pub seed_basis: Option<CMatrix>,
    /// Minimum norm a completion column may have after projection.
    pub breakdown_floor: f64,
}

impl Default for CompletionOptions {
    fn default() -> Self {
        Self {
            seed_basis: None,
            breakdown_floor: 1e-2,
        }
    }
}

fn constrained_columns(ops: &[CMatrix], d: usize, r: usize) -> Vec<CVector> {
    (0..d)
        .map(|j| {
            let mut col = CVector::zeros(d * r);
            for (k, m) in ops.iter().enumerate() {
                for i in 0..d {
                    col[i * r + k] = m[(i, j)];
                }
            }
            col
        })
        .collect()
}

/// Remove the components along `basis` twice; the second pass mops up
/// cancellation error from the first.
fn project_out(v: &mut CVector, basis: &[CVector]) {
    for _ in 0..2 {
        for b in basis {
            let overlap = b.dotc(v);
            *v -= b * overlap;
        }
    }
}

/// Unitary dilation path from a Kraus family.
///
/// The `|0_B⟩` columns hold the Kraus operators. The other `d(R−1)` columns
/// are built once at the first grid point by Gram–Schmidt from the seed basis
/// and afterwards carried along by re-orthonormalizing the previous columns
/// against the new constrained ones, which keeps them as smooth as the Kraus
/// operators. With `M_1 = 𝟙` at the start and the canonical seed, `U = 𝟙`
/// there.
pub fn complete_unitary(kf: &KrausFamily, opts: &CompletionOptions) -> Result<UnitaryPath> {
    let (d, r) = (kf.dim, kf.rank());
    let n = d * r;
    let slots: Vec<usize> = (0..d)
        .flat_map(|j| (1..r).map(move |k| j * r + k))
        .collect();
    let seed = opts.seed_basis.clone().unwrap_or_else(|| identity(n));
    if seed.shape() != (n, n) {
        return Err(DilateError::Dimension(format!(
            "seed basis is {:?}, expected {n}x{n}",
            seed.shape()
        )));
    }

    let first = constrained_columns(&kf.ops[0], d, r);
    let mut completion: Vec<CVector> = Vec::with_capacity(slots.len());
    for s in 0..n {
        if completion.len() == slots.len() {
            break;
        }
        let mut v = seed.column(s).into_owned();
        project_out(&mut v, &first);
        project_out(&mut v, &completion);
        let norm = v.norm();
        if norm > 1e-6 {
            completion.push(v.unscale(norm));
        }
    }
    if completion.len() < slots.len() {
        return Err(DilateError::GramSchmidtBreakdown {
            index: 0,
            t: kf.grid.time(0),
            column: completion.len(),
            norm: 0.0,
        });
    }

    let assemble = |constrained: &[CVector], completion: &[CVector]| {
        let mut u = CMatrix::zeros(n, n);
        for (j, col) in constrained.iter().enumerate() {
            u.set_column(j * r, col);
        }
        for (slot, col) in slots.iter().zip(completion) {
            u.set_column(*slot, col);
        }
        u
    };

    let mut unitaries = Vec::with_capacity(kf.grid.len());
    let mut steps = Vec::with_capacity(kf.grid.n_steps);
    unitaries.push(assemble(&first, &completion));
    for step in 1..kf.grid.len() {
        let constrained = constrained_columns(&kf.ops[step], d, r);
        let mut next: Vec<CVector> = Vec::with_capacity(completion.len());
        let mut worst: f64 = 0.0;
        for (col, old) in completion.iter().enumerate() {
            let mut v = old.clone();
            project_out(&mut v, &constrained);
            project_out(&mut v, &next);
            let norm = v.norm();
            if norm < opts.breakdown_floor {
                return Err(DilateError::GramSchmidtBreakdown {
                    index: step,
                    t: kf.grid.time(step),
                    column: slots[col],
                    norm,
                });
            }
            let v = v.unscale(norm);
            worst = worst.max((&v - old).norm());
            next.push(v);
        }
        unitaries.push(assemble(&constrained, &next));
        steps.push(worst);
        completion = next;
    }
    Ok(UnitaryPath {
        grid: kf.grid,
        system_dim: d,
        ancilla_dim: r,
        unitaries,
        completion_steps: steps,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::{c, max_abs, pauli};

    #[test]
    fn rank_one_identity_family_gives_identity() {
        let grid = TimeGrid::new(0.0, 1.0, 5).unwrap();
        let kf = KrausFamily::constant(grid, vec![identity(2)]).unwrap();
        let up = complete_unitary(&kf, &CompletionOptions::default()).unwrap();
        assert!(up
            .unitaries
            .iter()
            .all(|u| max_abs(&(u - identity(2))) == 0.0));
    }

    #[test]
    fn canonical_start_is_identity() {
        let grid = TimeGrid::new(0.0, 1.0, 5).unwrap();
        let kf = KrausFamily::constant(
            grid,
            vec![identity(2), CMatrix::zeros(2, 2), CMatrix::zeros(2, 2)],
        )
        .unwrap();
        let up = complete_unitary(&kf, &CompletionOptions::default()).unwrap();
        assert!(max_abs(&(&up.unitaries[0] - identity(6))) < 1e-15);
    }

    #[test]
    fn phase_flip_family_is_completed_smoothly() {
        let grid = TimeGrid::new(0.0, 1.0, 1000).unwrap();
        let ops: Vec<Vec<CMatrix>> = grid
            .times()
            .iter()
            .map(|&t| {
                let th = 0.7 * t;
                vec![
                    identity(2) * c(th.cos(), 0.0),
                    pauli::z() * c(th.sin(), 0.0),
                ]
            })
            .collect();
        let kf = KrausFamily {
            grid,
            dim: 2,
            completeness_residual: vec![0.0; grid.len()],
            ops,
        };
        let up = complete_unitary(&kf, &CompletionOptions::default()).unwrap();
        assert!(up.max_unitarity_residual() < 1e-13);
        assert!(up.max_constraint_residual(&kf) < 1e-15);
        let k = up.completion_steps.iter().copied().fold(0.0, f64::max) / grid.dt();
        assert!((k - 0.7).abs() < 1e-3, "K = {k}");
    }

    #[test]
    fn seed_basis_must_match_dimension() {
        let grid = TimeGrid::new(0.0, 1.0, 2).unwrap();
        let kf = KrausFamily::constant(grid, vec![identity(2), CMatrix::zeros(2, 2)]).unwrap();
        let opts = CompletionOptions {
            seed_basis: Some(identity(3)),
            ..Default::default()
        };
        assert!(complete_unitary(&kf, &opts).is_err());
    }
}
