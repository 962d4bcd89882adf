use serde::{Deserialize, Serialize};

use crate::dilation::DilationPath;
use crate::error::{DilateError, Result};
use crate::linalg::{c, hs_inner, operator_norm, CMatrix};
use crate::numerics::bisect;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CutoffMode {
    /// For `H(t) = h(t)·X`, replace `h` by `sign(h)·C` where `|h| > C`.
    PrefactorClamp,
    /// Rescale `H(t)` to operator norm `C` where it exceeds `C`.
    NormClamp,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CutoffPolicy {
    /// Operator-norm cap in 1/time.
    pub c: f64,
    pub mode: CutoffMode,
}

impl CutoffPolicy {
    pub fn new(c: f64, mode: CutoffMode) -> Result<Self> {
        if c.is_nan() || c <= 0.0 {
            return Err(DilateError::InvalidInput(format!(
                "cutoff must be positive, got {c}"
            )));
        }
        Ok(Self { c, mode })
    }
}

/// `H(t_n) = h_n · X` with `‖X‖ = 1`.
#[derive(Debug, Clone)]
pub struct Factorization {
    pub x: CMatrix,
    pub h: Vec<f64>,
    pub max_residual: f64,
}

/// Recognize a Hamiltonian path of the form `h(t)·X`. The direction `X` is
/// taken from the point of largest norm; each `h_n` is the Hilbert–Schmidt
/// projection onto it, and the remainder must stay below
/// `tol · (1 + ‖H_n‖)`.
pub fn factorize(dp: &DilationPath, tol: f64) -> Result<Factorization> {
    let defined = &dp.hamiltonians[dp.first_defined..];
    let norms: Vec<f64> = defined.iter().map(operator_norm).collect();
    let (ref_idx, ref_norm) =
        norms.iter().copied().enumerate().fold(
            (0, 0.0),
            |best, (i, v)| if v > best.1 { (i, v) } else { best },
        );
    if ref_norm == 0.0 {
        return Err(DilateError::NonFactorable {
            index: dp.first_defined,
            t: dp.grid.time(dp.first_defined),
            residual: 0.0,
        });
    }
    let x = &defined[ref_idx] * c(1.0 / ref_norm, 0.0);
    let xx = hs_inner(&x, &x).re;
    let mut h = vec![0.0; dp.hamiltonians.len()];
    let mut worst: f64 = 0.0;
    for (n, hn) in dp.hamiltonians.iter().enumerate().skip(dp.first_defined) {
        let coeff = hs_inner(&x, hn).re / xx;
        let residual = operator_norm(&(hn - &x * c(coeff, 0.0)));
        if residual > tol * (1.0 + operator_norm(hn)) {
            return Err(DilateError::NonFactorable {
                index: n,
                t: dp.grid.time(n),
                residual,
            });
        }
        worst = worst.max(residual);
        h[n] = coeff;
    }
    if dp.first_defined > 0 {
        let lead = h[dp.first_defined];
        for v in &mut h[..dp.first_defined] {
            *v = lead.signum() * f64::INFINITY;
        }
    }
    Ok(Factorization {
        x,
        h,
        max_residual: worst,
    })
}

/// The clamped path and where clamping acted.
#[derive(Debug, Clone)]
pub struct CutoffResult {
    pub path: DilationPath,
    pub clamped: Vec<usize>,
    /// `(first, last)` clamped times, if any.
    pub window: Option<(f64, f64)>,
}

/// Cap the Hamiltonian at `policy.c`. A path that diverges at its first
/// point gets the capped Hamiltonian there as well, so the result is defined
/// on the whole grid.
pub fn apply_cutoff(dp: &DilationPath, policy: &CutoffPolicy) -> Result<CutoffResult> {
    let mut out = dp.clone();
    let mut clamped = Vec::new();
    if policy.c.is_infinite() {
        return Ok(CutoffResult {
            path: out,
            clamped,
            window: None,
        });
    }
    match policy.mode {
        CutoffMode::PrefactorClamp => {
            let f = factorize(dp, 1e-6)?;
            for (n, &hn) in f.h.iter().enumerate() {
                if hn.abs() > policy.c {
                    out.hamiltonians[n] = &f.x * c(hn.signum() * policy.c, 0.0);
                    clamped.push(n);
                }
            }
        }
        CutoffMode::NormClamp => {
            for n in 0..dp.hamiltonians.len() {
                let source = if n < dp.first_defined {
                    dp.first_defined
                } else {
                    n
                };
                let hs = &dp.hamiltonians[source];
                let norm = operator_norm(hs);
                if n < dp.first_defined || norm > policy.c {
                    out.hamiltonians[n] = hs * c(policy.c / norm, 0.0);
                    clamped.push(n);
                }
            }
        }
    }
    out.first_defined = 0;
    for n in 0..dp.first_defined {
        out.anti_hermitian_residual[n] = 0.0;
    }
    let window = match (clamped.first(), clamped.last()) {
        (Some(&a), Some(&b)) => Some((dp.grid.time(a), dp.grid.time(b))),
        _ => None,
    };
    Ok(CutoffResult {
        path: out,
        clamped,
        window,
    })
}

/// Time at which a decreasing prefactor `h` falls to `c`, found by bisection
/// on `[lo, hi]`.
pub fn clamp_window_end<F: Fn(f64) -> f64>(
    h: F,
    c: f64,
    lo: f64,
    hi: f64,
    tol: f64,
) -> Option<f64> {
    bisect(|t| h(t) - c, lo, hi, tol)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::generators::TimeGrid;
    use crate::linalg::{kron, pauli};

    fn dephasing_like(grid: TimeGrid) -> DilationPath {
        let x = kron(&pauli::z(), &pauli::y());
        let h = |t: f64| 1.0 / (2.0 * ((2.0 * t).exp() - 1.0).sqrt());
        let hams: Vec<CMatrix> = grid
            .times()
            .iter()
            .map(|&t| {
                if t == 0.0 {
                    x.clone() * c(0.0, 0.0)
                } else {
                    &x * c(h(t), 0.0)
                }
            })
            .collect();
        DilationPath {
            grid,
            system_dim: 2,
            ancilla_dim: 2,
            unitaries: vec![crate::linalg::identity(4); grid.len()],
            anti_hermitian_residual: vec![0.0; grid.len()],
            hamiltonians: hams,
            first_defined: 1,
        }
    }

    #[test]
    fn infinite_cap_leaves_path_unchanged() {
        let grid = TimeGrid::new(0.0, 2.0, 200).unwrap();
        let dp = dephasing_like(grid);
        let out = apply_cutoff(
            &dp,
            &CutoffPolicy::new(f64::INFINITY, CutoffMode::PrefactorClamp).unwrap(),
        )
        .unwrap();
        assert!(out.clamped.is_empty() && out.window.is_none());
        assert_eq!(out.path.hamiltonians, dp.hamiltonians);
    }

    #[test]
    fn prefactor_clamp_caps_the_scalar() {
        let grid = TimeGrid::new(0.0, 2.0, 2000).unwrap();
        let dp = dephasing_like(grid);
        let out = apply_cutoff(
            &dp,
            &CutoffPolicy::new(3.0, CutoffMode::PrefactorClamp).unwrap(),
        )
        .unwrap();
        let (_, end) = out.window.unwrap();
        let h = |t: f64| 1.0 / (2.0 * ((2.0 * t).exp() - 1.0).sqrt());
        let tc = clamp_window_end(h, 3.0, 1e-9, 2.0, 1e-12).unwrap();
        let exact = (1.0 + 1.0 / 36.0f64).ln() / 2.0;
        assert!((tc - exact).abs() < 1e-10);
        assert!(end <= tc && tc - end < grid.dt());
        assert!(out
            .path
            .hamiltonians
            .iter()
            .all(|m| operator_norm(m) <= 3.0 + 1e-12));
    }

    #[test]
    fn non_factorable_path_is_rejected() {
        let grid = TimeGrid::new(0.0, 1.0, 10).unwrap();
        let mut dp = dephasing_like(grid);
        dp.hamiltonians[5] = kron(&pauli::x(), &pauli::x());
        assert!(matches!(
            apply_cutoff(
                &dp,
                &CutoffPolicy::new(1.0, CutoffMode::PrefactorClamp).unwrap()
            ),
            Err(DilateError::NonFactorable { index: 5, .. })
        ));
        assert!(apply_cutoff(&dp, &CutoffPolicy::new(1.0, CutoffMode::NormClamp).unwrap()).is_ok());
    }
}
