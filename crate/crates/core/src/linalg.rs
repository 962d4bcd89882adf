//! Dense complex matrix helpers shared by every stage of the pipeline.
//!
//! Everything here works on `nalgebra::DMatrix<Complex64>`. Tensor products
//! order factors left to right, so for `A ⊗ B` the basis state `|a⟩|b⟩` has
//! flat index `a * dim_b + b`.

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;

use crate::error::{DilateError, Result};

pub type CMatrix = DMatrix<Complex64>;
pub type CVector = DVector<Complex64>;

pub const ZERO: Complex64 = Complex64::new(0.0, 0.0);
pub const ONE: Complex64 = Complex64::new(1.0, 0.0);
pub const I: Complex64 = Complex64::new(0.0, 1.0);

#[inline]
pub fn c(re: f64, im: f64) -> Complex64 {
    Complex64::new(re, im)
}

pub fn identity(d: usize) -> CMatrix {
    CMatrix::identity(d, d)
}

pub fn zeros(rows: usize, cols: usize) -> CMatrix {
    CMatrix::zeros(rows, cols)
}

/// Single-qubit operators in the `{|0⟩, |1⟩}` basis with `σ_z = diag(1, -1)`.
pub mod pauli {
    use super::*;

    pub fn x() -> CMatrix {
        CMatrix::from_row_slice(2, 2, &[ZERO, ONE, ONE, ZERO])
    }

    pub fn y() -> CMatrix {
        CMatrix::from_row_slice(2, 2, &[ZERO, -I, I, ZERO])
    }

    pub fn z() -> CMatrix {
        CMatrix::from_row_slice(2, 2, &[ONE, ZERO, ZERO, -ONE])
    }

    /// Lowering operator `σ₋ = |0⟩⟨1|`; `|1⟩` is the decaying level.
    pub fn minus() -> CMatrix {
        CMatrix::from_row_slice(2, 2, &[ZERO, ONE, ZERO, ZERO])
    }

    /// Raising operator `σ₊ = |1⟩⟨0|`.
    pub fn plus() -> CMatrix {
        CMatrix::from_row_slice(2, 2, &[ZERO, ZERO, ONE, ZERO])
    }
}

/// Kronecker product `a ⊗ b`.
pub fn kron(a: &CMatrix, b: &CMatrix) -> CMatrix {
    a.kronecker(b)
}

/// Kronecker product of a list of operators, left to right.
pub fn kron_all(ops: &[CMatrix]) -> CMatrix {
    ops.iter().skip(1).fold(
        ops.first().cloned().unwrap_or_else(|| identity(1)),
        |acc, op| kron(&acc, op),
    )
}

/// `Tr_B(m)` for `m` acting on `A ⊗ B`.
pub fn partial_trace_second(m: &CMatrix, dim_a: usize, dim_b: usize) -> Result<CMatrix> {
    let n = dim_a * dim_b;
    if m.nrows() != n || m.ncols() != n {
        return Err(DilateError::Dimension(format!(
            "partial trace expects {n}x{n} for {dim_a}x{dim_b} factors, got {}x{}",
            m.nrows(),
            m.ncols()
        )));
    }
    Ok(CMatrix::from_fn(dim_a, dim_a, |i, j| {
        (0..dim_b).map(|k| m[(i * dim_b + k, j * dim_b + k)]).sum()
    }))
}

/// `Tr_A(m)` for `m` acting on `A ⊗ B`.
pub fn partial_trace_first(m: &CMatrix, dim_a: usize, dim_b: usize) -> Result<CMatrix> {
    let n = dim_a * dim_b;
    if m.nrows() != n || m.ncols() != n {
        return Err(DilateError::Dimension(format!(
            "partial trace expects {n}x{n} for {dim_a}x{dim_b} factors, got {}x{}",
            m.nrows(),
            m.ncols()
        )));
    }
    Ok(CMatrix::from_fn(dim_b, dim_b, |i, j| {
        (0..dim_a).map(|k| m[(k * dim_b + i, k * dim_b + j)]).sum()
    }))
}

/// Largest singular value.
pub fn operator_norm(a: &CMatrix) -> f64 {
    if a.is_empty() {
        return 0.0;
    }
    a.clone()
        .svd(false, false)
        .singular_values
        .iter()
        .copied()
        .fold(0.0, f64::max)
}

pub fn frobenius_norm(a: &CMatrix) -> f64 {
    a.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt()
}

/// Largest entrywise modulus.
pub fn max_abs(a: &CMatrix) -> f64 {
    a.iter().map(|z| z.norm()).fold(0.0, f64::max)
}

pub fn hermitian_part(a: &CMatrix) -> CMatrix {
    (a + a.adjoint()) * c(0.5, 0.0)
}

pub fn anti_hermitian_part(a: &CMatrix) -> CMatrix {
    (a - a.adjoint()) * c(0.5, 0.0)
}

/// Distance of `a` from Hermiticity, `max |a - a†|`.
pub fn hermiticity_residual(a: &CMatrix) -> f64 {
    max_abs(&(a - a.adjoint()))
}

/// `‖u u† − 𝟙‖` in operator norm.
pub fn unitarity_residual(u: &CMatrix) -> f64 {
    operator_norm(&(u * u.adjoint() - identity(u.nrows())))
}

/// Eigen-decomposition of the Hermitian part of `a`, eigenvalues in descending
/// order with matching eigenvector columns.
pub fn eigh_desc(a: &CMatrix) -> (Vec<f64>, CMatrix) {
    let h = hermitian_part(a);
    let eig = h.symmetric_eigen();
    let n = eig.eigenvalues.len();
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| eig.eigenvalues[j].total_cmp(&eig.eigenvalues[i]));
    let values = order.iter().map(|&i| eig.eigenvalues[i]).collect();
    let vectors = CMatrix::from_fn(n, n, |r, k| eig.eigenvectors[(r, order[k])]);
    (values, vectors)
}

/// Smallest eigenvalue of the Hermitian part of `a`.
pub fn min_eigenvalue(a: &CMatrix) -> f64 {
    hermitian_part(a)
        .symmetric_eigenvalues()
        .iter()
        .copied()
        .fold(f64::INFINITY, f64::min)
}

/// `exp(−i h t)` for Hermitian `h`.
pub fn expm_hermitian(h: &CMatrix, t: f64) -> CMatrix {
    let (vals, vecs) = eigh_desc(h);
    let phases = CMatrix::from_diagonal(&CVector::from_iterator(
        vals.len(),
        vals.iter().map(|&v| Complex64::from_polar(1.0, -v * t)),
    ));
    &vecs * phases * vecs.adjoint()
}

/// Closest unitary to `m` in Frobenius norm (unitary factor of the polar
/// decomposition).
pub fn polar_unitary(m: &CMatrix) -> CMatrix {
    let svd = m.clone().svd(true, true);
    match (svd.u, svd.v_t) {
        (Some(u), Some(v_t)) => u * v_t,
        _ => m.clone(),
    }
}

/// Column-stacking vectorization: `vec(ρ)[i + j·d] = ρ[i, j]`.
pub fn vec_col(m: &CMatrix) -> CVector {
    CVector::from_column_slice(m.as_slice())
}

/// Inverse of [`vec_col`] for a `d × d` matrix.
pub fn unvec_col(v: &[Complex64], d: usize) -> CMatrix {
    CMatrix::from_column_slice(d, d, v)
}

/// `|ψ⟩⟨ψ|`
pub fn projector(psi: &CVector) -> CMatrix {
    psi * psi.adjoint()
}

/// Hilbert-Schmidt inner product `Tr(a† b)`.
pub fn hs_inner(a: &CMatrix, b: &CMatrix) -> Complex64 {
    a.iter().zip(b.iter()).map(|(x, y)| x.conj() * y).sum()
}

/// Embed `op`, acting on the tensor factors `targets` (in that order), into
/// the full space with factor dimensions `dims`, acting as the identity on
/// every other factor.
pub fn embed(op: &CMatrix, targets: &[usize], dims: &[usize]) -> Result<CMatrix> {
    let target_dim: usize = targets.iter().map(|&t| dims[t]).product();
    if op.nrows() != target_dim || op.ncols() != target_dim {
        return Err(DilateError::Dimension(format!(
            "operator is {}x{} but target factors span {target_dim}",
            op.nrows(),
            op.ncols()
        )));
    }
    for (k, &t) in targets.iter().enumerate() {
        if t >= dims.len() || targets[..k].contains(&t) {
            return Err(DilateError::Dimension(format!(
                "invalid target factor list {targets:?}"
            )));
        }
    }
    let total: usize = dims.iter().product();
    let mut strides = vec![1usize; dims.len()];
    for k in (0..dims.len().saturating_sub(1)).rev() {
        strides[k] = strides[k + 1] * dims[k + 1];
    }
    let digit = |x: usize, k: usize| (x / strides[k]) % dims[k];

    let mut out = zeros(total, total);
    for row in 0..total {
        let mut row_t = 0;
        let mut base = row;
        for &t in targets {
            row_t = row_t * dims[t] + digit(row, t);
            base -= digit(row, t) * strides[t];
        }
        for col_t in 0..target_dim {
            let val = op[(row_t, col_t)];
            if val == ZERO {
                continue;
            }
            let mut col = base;
            let mut rem = col_t;
            for &t in targets.iter().rev() {
                col += (rem % dims[t]) * strides[t];
                rem /= dims[t];
            }
            out[(row, col)] = val;
        }
    }
    Ok(out)
}

/// Trace out every factor not listed in `keep` from a state on factors `dims`.
/// The kept factors appear in increasing factor order.
pub fn partial_trace_keep(m: &CMatrix, keep: &[usize], dims: &[usize]) -> Result<CMatrix> {
    let total: usize = dims.iter().product();
    if m.nrows() != total || m.ncols() != total {
        return Err(DilateError::Dimension(format!(
            "state is {}x{} but factors span {total}",
            m.nrows(),
            m.ncols()
        )));
    }
    let mut keep_sorted = keep.to_vec();
    keep_sorted.sort_unstable();
    let kept_dim: usize = keep_sorted.iter().map(|&k| dims[k]).product();
    let mut strides = vec![1usize; dims.len()];
    for k in (0..dims.len().saturating_sub(1)).rev() {
        strides[k] = strides[k + 1] * dims[k + 1];
    }
    let mut out = zeros(kept_dim, kept_dim);
    for row in 0..total {
        for col in 0..total {
            let mut same_traced = true;
            let mut r = 0;
            let mut q = 0;
            for (k, &dk) in dims.iter().enumerate() {
                let dr = (row / strides[k]) % dk;
                let dc = (col / strides[k]) % dk;
                if keep_sorted.contains(&k) {
                    r = r * dk + dr;
                    q = q * dk + dc;
                } else if dr != dc {
                    same_traced = false;
                    break;
                }
            }
            if same_traced {
                out[(r, q)] += m[(row, col)];
            }
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn assert_close(a: &CMatrix, b: &CMatrix, tol: f64) {
        assert_eq!(a.shape(), b.shape());
        let diff = max_abs(&(a - b));
        assert!(diff < tol, "matrices differ by {diff}\n{a}\n{b}");
    }

    #[test]
    fn kron_of_identities_is_identity() {
        assert_close(&kron(&identity(2), &identity(2)), &identity(4), 0.0 + 1e-15);
    }

    #[test]
    fn kron_sigma_z_sigma_y_has_signed_blocks() {
        let k = kron(&pauli::z(), &pauli::y());
        let y = pauli::y();
        let mut expected = zeros(4, 4);
        for i in 0..2 {
            for j in 0..2 {
                expected[(i, j)] = y[(i, j)];
                expected[(2 + i, 2 + j)] = -y[(i, j)];
            }
        }
        assert_close(&k, &expected, 1e-15);
    }

    #[test]
    fn kron_matches_index_formula_for_rectangular_inputs() {
        let a = CMatrix::from_fn(2, 3, |i, j| c(i as f64 + 0.5, j as f64 - 1.0));
        let b = CMatrix::from_fn(3, 2, |i, j| c((i * j) as f64, 1.0 + i as f64));
        let k = kron(&a, &b);
        assert_eq!(k.shape(), (6, 6));
        for i in 0..2 {
            for j in 0..3 {
                for p in 0..3 {
                    for q in 0..2 {
                        assert_eq!(k[(i * 3 + p, j * 2 + q)], a[(i, j)] * b[(p, q)]);
                    }
                }
            }
        }
    }

    #[test]
    fn partial_trace_of_product_state() {
        let rho =
            CMatrix::from_row_slice(2, 2, &[c(0.7, 0.0), c(0.1, -0.2), c(0.1, 0.2), c(0.3, 0.0)]);
        let mut omega = zeros(2, 2);
        omega[(0, 0)] = ONE;
        let reduced = partial_trace_second(&kron(&rho, &omega), 2, 2).unwrap();
        assert_close(&reduced, &rho, 1e-15);
    }

    #[test]
    fn partial_trace_of_bell_state_is_maximally_mixed() {
        let mut omega = CVector::zeros(4);
        omega[0] = ONE;
        omega[3] = ONE;
        let bell = projector(&omega) * c(0.5, 0.0);
        let reduced = partial_trace_second(&bell, 2, 2).unwrap();
        assert_close(&reduced, &(identity(2) * c(0.5, 0.0)), 1e-15);
    }

    #[test]
    fn partial_trace_sums_diagonal_blocks_of_the_second_index() {
        let m = CMatrix::from_fn(4, 4, |i, j| c((i * 4 + j) as f64, (i as f64) - (j as f64)));
        let h = hermitian_part(&m);
        let reduced = partial_trace_second(&h, 2, 2).unwrap();
        for a in 0..2 {
            for b in 0..2 {
                let brute = h[(2 * a, 2 * b)] + h[(2 * a + 1, 2 * b + 1)];
                assert_eq!(reduced[(a, b)], brute);
            }
        }
        assert!((reduced.trace() - h.trace()).norm() < 1e-12);
    }

    #[test]
    fn partial_trace_rejects_wrong_dimensions() {
        assert!(partial_trace_second(&identity(3), 2, 2).is_err());
    }

    #[test]
    fn operator_norm_examples() {
        assert!((operator_norm(&identity(3)) - 1.0).abs() < 1e-14);
        assert!((operator_norm(&kron(&pauli::z(), &pauli::y())) - 1.0).abs() < 1e-14);
        let d = CMatrix::from_row_slice(2, 2, &[c(3.0, 0.0), ZERO, ZERO, c(0.0, 4.0)]);
        assert!((operator_norm(&d) - 4.0).abs() < 1e-14);
    }

    #[test]
    fn expm_of_sigma_z() {
        let t = 0.37;
        let u = expm_hermitian(&pauli::z(), t);
        let expected = CMatrix::from_row_slice(
            2,
            2,
            &[
                Complex64::from_polar(1.0, -t),
                ZERO,
                ZERO,
                Complex64::from_polar(1.0, t),
            ],
        );
        assert_close(&u, &expected, 1e-14);
    }

    #[test]
    fn embed_matches_kron_for_leading_factor() {
        let op = pauli::x();
        let full = embed(&op, &[0], &[2, 3]).unwrap();
        assert_close(&full, &kron(&op, &identity(3)), 1e-15);
        let pair = kron(&pauli::z(), &pauli::y());
        let swapped = embed(&pair, &[2, 0], &[2, 3, 2]).unwrap();
        // factor 2 carries σ_z, factor 0 carries σ_y
        let expected = kron(&kron(&pauli::y(), &identity(3)), &pauli::z());
        assert_close(&swapped, &expected, 1e-15);
    }

    #[test]
    fn partial_trace_keep_agrees_with_two_factor_trace() {
        let m = hermitian_part(&CMatrix::from_fn(6, 6, |i, j| {
            c((i + 2 * j) as f64, (i * j) as f64 * 0.1)
        }));
        let a = partial_trace_keep(&m, &[0], &[2, 3]).unwrap();
        assert_close(&a, &partial_trace_second(&m, 2, 3).unwrap(), 1e-12);
        let b = partial_trace_keep(&m, &[1], &[2, 3]).unwrap();
        assert_close(&b, &partial_trace_first(&m, 2, 3).unwrap(), 1e-12);
    }

    #[test]
    fn polar_unitary_restores_unitarity() {
        let u = expm_hermitian(&kron(&pauli::x(), &pauli::y()), 0.4);
        let noisy = &u + CMatrix::from_fn(4, 4, |i, j| c(1e-6 * (i as f64 - j as f64), 0.0));
        let fixed = polar_unitary(&noisy);
        assert!(unitarity_residual(&fixed) < 1e-13);
        assert!(max_abs(&(fixed - u)) < 1e-5);
    }
}
