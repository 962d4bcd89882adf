use crate::dilation::DilationPath;
use crate::error::{DilateError, Result};
use crate::linalg::{expm_hermitian, hermiticity_residual, identity, kron, operator_norm, CMatrix};

/// Constant frame Hamiltonian `H₀` on the system; `U₀(t) = exp(−iH₀t)`.
#[derive(Debug, Clone, PartialEq)]
pub struct FrameSpec {
    h0: CMatrix,
}

impl FrameSpec {
    pub fn new(h0: CMatrix) -> Result<Self> {
        if !h0.is_square() {
            return Err(DilateError::Dimension(format!(
                "frame Hamiltonian is {:?}",
                h0.shape()
            )));
        }
        let residual = hermiticity_residual(&h0);
        if residual > 1e-12 * (1.0 + operator_norm(&h0)) {
            return Err(DilateError::InvalidInput(format!(
                "frame Hamiltonian is not Hermitian (residual {residual:e})"
            )));
        }
        Ok(Self { h0 })
    }

    pub fn h0(&self) -> &CMatrix {
        &self.h0
    }

    pub fn dim(&self) -> usize {
        self.h0.nrows()
    }

    pub fn unitary(&self, t: f64) -> CMatrix {
        expm_hermitian(&self.h0, t)
    }

    /// The frame with `−H₀`, which undoes this one.
    pub fn inverse(&self) -> Self {
        Self {
            h0: -self.h0.clone(),
        }
    }
}

/// Move a dilation built in the frame rotating with `H₀` back to the lab:
/// `U = (U₀⊗𝟙)Ũ` and `H = H₀⊗𝟙 + (U₀⊗𝟙)H̃(U₀†⊗𝟙)`.
///
/// Placeholder entries before `first_defined` stay zero.
pub fn frame_change(frame: &FrameSpec, tilde: &DilationPath) -> Result<DilationPath> {
    if frame.dim() != tilde.system_dim {
        return Err(DilateError::Dimension(format!(
            "frame acts on dimension {}, dilation system has {}",
            frame.dim(),
            tilde.system_dim
        )));
    }
    let anc = identity(tilde.ancilla_dim);
    let h0_ext = kron(frame.h0(), &anc);
    let mut out = tilde.clone();
    for (n, t) in tilde.grid.times().into_iter().enumerate() {
        let u0 = kron(&frame.unitary(t), &anc);
        out.unitaries[n] = &u0 * &tilde.unitaries[n];
        if n >= tilde.first_defined {
            out.hamiltonians[n] = &h0_ext + &u0 * &tilde.hamiltonians[n] * u0.adjoint();
        }
    }
    Ok(out)
}
