use crate::channel::{kraus_to_superop, KrausSet, Superoperator};
use crate::dilation::EigenTrack;
use crate::error::{DilateError, Result};
use crate::generators::TimeGrid;
use crate::linalg::{unvec_col, CMatrix};

/// `R` Kraus operators per grid point, in retained-track order.
#[derive(Debug, Clone)]
pub struct KrausFamily {
    pub grid: TimeGrid,
    pub dim: usize,
    pub ops: Vec<Vec<CMatrix>>,
    pub completeness_residual: Vec<f64>,
}

impl KrausFamily {
    pub fn rank(&self) -> usize {
        self.ops[0].len()
    }

    pub fn set(&self, n: usize) -> KrausSet {
        KrausSet::new(self.ops[n].clone()).expect("family members share one dimension")
    }

    pub fn superop(&self, n: usize) -> Superoperator {
        kraus_to_superop(&self.set(n))
    }

    pub fn max_completeness_residual(&self) -> f64 {
        self.completeness_residual
            .iter()
            .copied()
            .fold(0.0, f64::max)
    }

    /// A constant family, mostly useful in tests.
    pub fn constant(grid: TimeGrid, ops: Vec<CMatrix>) -> Result<Self> {
        let set = KrausSet::new(ops)?;
        let residual = set.completeness_residual();
        Ok(Self {
            grid,
            dim: set.dim(),
            ops: vec![set.ops().to_vec(); grid.len()],
            completeness_residual: vec![residual; grid.len()],
        })
    }
}

/// `M_k(t) = √λ_k(t) · unvec(v_k(t))`, with tiny negative eigenvalues clamped
/// to zero. Fails if `Σ M_k† M_k` departs from `𝟙` by more than `tol`.
pub fn kraus_from_eigentrack(et: &EigenTrack, tol: f64) -> Result<KrausFamily> {
    let d = et.dim;
    let mut ops = Vec::with_capacity(et.grid.len());
    let mut residuals = Vec::with_capacity(et.grid.len());
    for n in 0..et.grid.len() {
        let set: Vec<CMatrix> = (0..et.rank())
            .map(|k| {
                let v = et.weighted_vector(k, n);
                unvec_col(v.as_slice(), d)
            })
            .collect();
        let residual = KrausSet::new(set.clone())?.completeness_residual();
        if residual > tol {
            return Err(DilateError::Completeness {
                index: n,
                t: et.grid.time(n),
                residual,
            });
        }
        ops.push(set);
        residuals.push(residual);
    }
    Ok(KrausFamily {
        grid: et.grid,
        dim: d,
        ops,
        completeness_residual: residuals,
    })
}
