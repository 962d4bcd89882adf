use crate::dilation::DilationPath;
use crate::error::{DilateError, Result};
use crate::generators::TimeGrid;
use crate::linalg::{embed, identity, CMatrix};
use crate::verify::{HamiltonianSource, SampledPath};

#[derive(Debug, Clone, Copy)]
pub struct TensorOptions {
    /// Largest allowed dimension of the composite space.
    pub max_dim: usize,
}

impl Default for TensorOptions {
    fn default() -> Self {
        Self { max_dim: 1024 }
    }
}

/// Independent single-qubit dilations acting side by side. Tensor factors
/// are ordered `[sys_1 … sys_n, anc_1 … anc_n]`; the Hamiltonian is
/// assembled lazily at each requested time.
#[derive(Debug, Clone)]
pub struct IndependentDilations<'a> {
    parts: Vec<&'a DilationPath>,
    dims: Vec<usize>,
}

pub fn tensor_independent<'a>(
    dilations: &'a [DilationPath],
    opts: TensorOptions,
) -> Result<IndependentDilations<'a>> {
    let first = dilations
        .first()
        .ok_or_else(|| DilateError::InvalidInput("no dilations to combine".into()))?;
    for (i, d) in dilations.iter().enumerate() {
        if d.system_dim != 2 {
            return Err(DilateError::Dimension(format!(
                "dilation {i} acts on dimension {}, expected one qubit",
                d.system_dim
            )));
        }
        if d.ancilla_dim > 4 {
            return Err(DilateError::Dimension(format!(
                "dilation {i} uses an ancilla of dimension {} (at most 4)",
                d.ancilla_dim
            )));
        }
        if !d.grid.same_as(&first.grid) {
            return Err(DilateError::GridMismatch(format!(
                "dilation {i} is sampled on {:?}, dilation 0 on {:?}",
                d.grid, first.grid
            )));
        }
    }
    let mut dims = vec![2; dilations.len()];
    dims.extend(dilations.iter().map(|d| d.ancilla_dim));
    let requested = dims
        .iter()
        .try_fold(1usize, |acc, &d| acc.checked_mul(d))
        .unwrap_or(usize::MAX);
    if requested > opts.max_dim {
        return Err(DilateError::DimensionCap {
            requested,
            cap: opts.max_dim,
        });
    }
    Ok(IndependentDilations {
        parts: dilations.iter().collect(),
        dims,
    })
}

impl IndependentDilations<'_> {
    pub fn qubits(&self) -> usize {
        self.parts.len()
    }

    pub fn dims(&self) -> &[usize] {
        &self.dims
    }

    pub fn grid(&self) -> TimeGrid {
        self.parts[0].grid
    }

    /// Latest `first_defined` among the parts.
    pub fn first_defined(&self) -> usize {
        self.parts
            .iter()
            .map(|p| p.first_defined)
            .max()
            .unwrap_or(0)
    }

    /// Tensor factors touched by the `i`-th term.
    pub fn term_support(&self, i: usize) -> [usize; 2] {
        [i, self.qubits() + i]
    }

    /// Qubits needed to hold the `i`-th ancilla.
    pub fn ancilla_qubits(&self, i: usize) -> usize {
        self.parts[i]
            .ancilla_dim
            .next_power_of_two()
            .trailing_zeros() as usize
    }

    /// `⊗_i U_i` at grid point `n`.
    pub fn unitary_at(&self, n: usize) -> Result<CMatrix> {
        let total = self.total_dim();
        let mut u = identity(total);
        for (i, p) in self.parts.iter().enumerate() {
            u = embed(&p.unitaries[n], &self.term_support(i), &self.dims)? * u;
        }
        Ok(u)
    }
}

impl HamiltonianSource for IndependentDilations<'_> {
    fn system_dim(&self) -> usize {
        1 << self.qubits()
    }

    fn ancilla_dim(&self) -> usize {
        self.dims[self.qubits()..].iter().product()
    }

    fn hamiltonian(&self, t: f64) -> Result<CMatrix> {
        let total = self.total_dim();
        let mut h = CMatrix::zeros(total, total);
        for (i, p) in self.parts.iter().enumerate() {
            h += embed(
                &SampledPath::new(p).hamiltonian(t)?,
                &self.term_support(i),
                &self.dims,
            )?;
        }
        Ok(h)
    }
}
