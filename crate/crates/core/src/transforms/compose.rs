use serde::{Deserialize, Serialize};

use crate::channel::{kraus_to_superop, KrausSet, Superoperator};
use crate::dilation::DilationPath;
use crate::error::{DilateError, Result};
use crate::linalg::{embed, max_abs, CMatrix};

/// Which factor acts last in the composed unitary.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CompositionOrder {
    /// `U = U⁽¹⁾ U⁽²⁾`
    FirstOuter,
    /// `U = U⁽²⁾ U⁽¹⁾`
    SecondOuter,
}

#[derive(Debug, Clone, Copy)]
pub struct ComposeOptions {
    pub order: CompositionOrder,
    /// Largest tolerated entry of `ε⁽¹⁾ε⁽²⁾ − ε⁽²⁾ε⁽¹⁾` at any grid point.
    pub commute_tol: f64,
}

impl Default for ComposeOptions {
    fn default() -> Self {
        Self {
            order: CompositionOrder::FirstOuter,
            commute_tol: 1e-8,
        }
    }
}

#[derive(Debug, Clone)]
pub struct Composition {
    /// Dilation on `A ⊗ (B ⊗ C)`.
    pub path: DilationPath,
    pub commutator_residual: f64,
}

/// Reduced channel of a dilation at grid point `n`, read from the `|0_B⟩`
/// columns of `U`.
pub fn reduced_channel(dp: &DilationPath, n: usize) -> Superoperator {
    let (d, r) = (dp.system_dim, dp.ancilla_dim);
    let u = &dp.unitaries[n];
    let ops = (0..r)
        .map(|k| CMatrix::from_fn(d, d, |i, j| u[(i * r + k, j * r)]))
        .collect();
    kraus_to_superop(&KrausSet::new(ops).expect("columns share one dimension"))
}

/// Compose the dilation `d1` of ε⁽¹⁾ on `A⊗C` with the dilation `d2` of ε⁽²⁾
/// on `A⊗B` into one dilation of `ε⁽¹⁾ε⁽²⁾` on `A⊗B⊗C`. With
/// [`CompositionOrder::FirstOuter`], `H = H⁽¹⁾ + U⁽¹⁾H⁽²⁾U⁽¹⁾†`.
///
/// The channels must commute at every grid point; otherwise the two orders
/// would describe different dynamics.
pub fn compose_commuting(
    d1: &DilationPath,
    d2: &DilationPath,
    opts: ComposeOptions,
) -> Result<Composition> {
    if !d1.grid.same_as(&d2.grid) {
        return Err(DilateError::GridMismatch(format!(
            "{:?} vs {:?}",
            d1.grid, d2.grid
        )));
    }
    if d1.system_dim != d2.system_dim {
        return Err(DilateError::Dimension(format!(
            "system dimensions {} and {}",
            d1.system_dim, d2.system_dim
        )));
    }
    let mut residual: f64 = 0.0;
    for n in 0..d1.grid.len() {
        let (e1, e2) = (reduced_channel(d1, n), reduced_channel(d2, n));
        let r = max_abs(&(e1.compose(&e2).matrix() - e2.compose(&e1).matrix()));
        if r > opts.commute_tol {
            return Err(DilateError::NonCommuting {
                t: d1.grid.time(n),
                residual: r,
            });
        }
        residual = residual.max(r);
    }

    let dims = [d1.system_dim, d2.ancilla_dim, d1.ancilla_dim];
    let on_ac = |m: &CMatrix| embed(m, &[0, 2], &dims);
    let on_ab = |m: &CMatrix| embed(m, &[0, 1], &dims);
    let first_defined = d1.first_defined.max(d2.first_defined);
    let total: usize = dims.iter().product();
    let mut unitaries = Vec::with_capacity(d1.grid.len());
    let mut hamiltonians = Vec::with_capacity(d1.grid.len());
    for n in 0..d1.grid.len() {
        let (u1, u2) = (on_ac(&d1.unitaries[n])?, on_ab(&d2.unitaries[n])?);
        let (outer, inner) = match opts.order {
            CompositionOrder::FirstOuter => (&u1, &u2),
            CompositionOrder::SecondOuter => (&u2, &u1),
        };
        unitaries.push(outer * inner);
        if n < first_defined {
            hamiltonians.push(CMatrix::zeros(total, total));
            continue;
        }
        let (h1, h2) = (on_ac(&d1.hamiltonians[n])?, on_ab(&d2.hamiltonians[n])?);
        let h = match opts.order {
            CompositionOrder::FirstOuter => &h1 + &u1 * h2 * u1.adjoint(),
            CompositionOrder::SecondOuter => &h2 + &u2 * h1 * u2.adjoint(),
        };
        hamiltonians.push(h);
    }
    let anti_hermitian_residual = d1
        .anti_hermitian_residual
        .iter()
        .zip(&d2.anti_hermitian_residual)
        .map(|(a, b)| a + b)
        .collect();
    Ok(Composition {
        path: DilationPath {
            grid: d1.grid,
            system_dim: d1.system_dim,
            ancilla_dim: d2.ancilla_dim * d1.ancilla_dim,
            unitaries,
            hamiltonians,
            anti_hermitian_residual,
            first_defined,
        },
        commutator_residual: residual,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::generators::TimeGrid;
    use crate::linalg::{c, expm_hermitian, identity, kron, pauli};

    fn path(h: CMatrix, r: usize) -> DilationPath {
        let grid = TimeGrid::new(0.0, 1.0, 10).unwrap();
        DilationPath {
            grid,
            system_dim: 2,
            ancilla_dim: r,
            unitaries: grid
                .times()
                .iter()
                .map(|&t| expm_hermitian(&h, t))
                .collect(),
            hamiltonians: vec![h; grid.len()],
            anti_hermitian_residual: vec![0.0; grid.len()],
            first_defined: 0,
        }
    }

    #[test]
    fn identity_second_dilation_extends_first() {
        let h1 = kron(&pauli::z(), &pauli::y()) * c(0.4, 0.0);
        let d1 = path(h1.clone(), 2);
        let d2 = path(CMatrix::zeros(2, 2), 1);
        let out = compose_commuting(&d1, &d2, ComposeOptions::default()).unwrap();
        assert_eq!(out.path.ancilla_dim, 2);
        assert!(out
            .path
            .hamiltonians
            .iter()
            .all(|h| max_abs(&(h - &h1)) < 1e-15));
    }

    #[test]
    fn non_commuting_channels_are_rejected() {
        // amplitude damping and bit flip
        let exchange = (kron(&pauli::minus(), &pauli::plus())
            - kron(&pauli::plus(), &pauli::minus()))
            * crate::linalg::I;
        let d1 = path(exchange, 2);
        let d2 = path(kron(&pauli::x(), &pauli::y()), 2);
        assert!(matches!(
            compose_commuting(&d1, &d2, ComposeOptions::default()),
            Err(DilateError::NonCommuting { .. })
        ));
    }

    #[test]
    fn orders_give_different_matrices_same_channel() {
        let d1 = path(kron(&pauli::z(), &pauli::y()) * c(0.4, 0.0), 2);
        // phase flip and bit flip commute as channels but not as generators
        let d2 = path(kron(&pauli::x(), &pauli::y()) * c(0.9, 0.0), 2);
        let a = compose_commuting(&d1, &d2, ComposeOptions::default()).unwrap();
        let b = compose_commuting(
            &d1,
            &d2,
            ComposeOptions {
                order: CompositionOrder::SecondOuter,
                ..Default::default()
            },
        )
        .unwrap();
        assert!(max_abs(&(&a.path.hamiltonians[5] - &b.path.hamiltonians[5])) > 1e-3);
        let (ea, eb) = (reduced_channel(&a.path, 7), reduced_channel(&b.path, 7));
        assert!(max_abs(&(ea.matrix() - eb.matrix())) < 1e-13);
        assert!(max_abs(&(&a.path.unitaries[0] - identity(8))) < 1e-15);
    }
}
