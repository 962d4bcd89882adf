use serde::Serialize;

use crate::channel::trace_distance_matrices;
use crate::error::{DilateError, Result};
use crate::generators::{StatePath, TimeGrid};
use crate::linalg::{operator_norm, CMatrix};
use crate::numerics::inverse_sqrt_first_interval;

/// Pointwise trace distance between two state paths.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ComparisonReport {
    pub times: Vec<f64>,
    pub distances: Vec<f64>,
    pub max_distance: f64,
    /// Grid time at which `max_distance` occurs.
    pub argmax_t: f64,
    /// Eq.-(3)-style unitary bound per time, when one was computed.
    pub bound: Option<Vec<f64>>,
    pub tolerance: f64,
    pub passed: bool,
}

/// Compare `a` and `b` at every grid point with `t >= from`.
pub fn compare_paths(
    a: &StatePath,
    b: &StatePath,
    from: f64,
    tolerance: f64,
) -> Result<ComparisonReport> {
    if !a.grid.same_as(&b.grid) || a.states.len() != b.states.len() {
        return Err(DilateError::GridMismatch(format!(
            "{:?} vs {:?}",
            a.grid, b.grid
        )));
    }
    let mut times = Vec::new();
    let mut distances = Vec::new();
    for (k, (x, y)) in a.states.iter().zip(&b.states).enumerate() {
        let t = a.grid.time(k);
        if t + 1e-12 * (1.0 + t.abs()) < from {
            continue;
        }
        if x.shape() != y.shape() {
            return Err(DilateError::Dimension(format!(
                "state shapes differ at grid point {k}"
            )));
        }
        times.push(t);
        distances.push(trace_distance_matrices(x, y));
    }
    let (argmax, max_distance) =
        distances
            .iter()
            .copied()
            .enumerate()
            .fold(
                (0, 0.0),
                |best, (i, v)| if v > best.1 { (i, v) } else { best },
            );
    Ok(ComparisonReport {
        argmax_t: times.get(argmax).copied().unwrap_or(from),
        times,
        distances,
        max_distance,
        bound: None,
        tolerance,
        passed: max_distance < tolerance,
    })
}

/// `∫₀ᵗ ‖H(t′) − H_T(t′)‖ dt′` on the grid by the trapezoidal rule.
///
/// With `singular_start` the integrand is assumed to behave like
/// `a/√t + b` on the first interval, which is then integrated exactly from
/// the values at `δt` and `2δt`; entries of `h_target` at index 0 are ignored.
pub fn unitary_error_bound(
    grid: &TimeGrid,
    h_target: &[CMatrix],
    h_applied: &[CMatrix],
    singular_start: bool,
) -> Result<Vec<f64>> {
    if h_target.len() != grid.len() || h_applied.len() != grid.len() {
        return Err(DilateError::GridMismatch(
            "Hamiltonian paths must match the grid".into(),
        ));
    }
    let diff: Vec<f64> = h_target
        .iter()
        .zip(h_applied)
        .map(|(a, b)| operator_norm(&(a - b)))
        .collect();
    let dt = grid.dt();
    let mut out = vec![0.0; grid.len()];
    for n in 1..grid.len() {
        let step = if n == 1 && singular_start {
            if grid.len() < 3 {
                return Err(DilateError::InvalidInput(
                    "singular start needs at least three grid points".into(),
                ));
            }
            inverse_sqrt_first_interval(diff[1], diff[2], dt)
        } else {
            0.5 * dt * (diff[n - 1] + diff[n])
        };
        out[n] = out[n - 1] + step;
    }
    Ok(out)
}

/// `‖U_n − V_n‖` per grid point.
pub fn unitary_errors(u: &[CMatrix], v: &[CMatrix]) -> Vec<f64> {
    u.iter()
        .zip(v)
        .map(|(a, b)| operator_norm(&(a - b)))
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::{c, identity, pauli};

    #[test]
    fn identical_paths_have_zero_distance() {
        let grid = TimeGrid::new(0.0, 1.0, 4).unwrap();
        let p = StatePath {
            grid,
            states: vec![identity(2) * c(0.5, 0.0); 5],
        };
        let r = compare_paths(&p, &p, 0.0, 1e-12).unwrap();
        assert_eq!(r.max_distance, 0.0);
        assert!(r.passed);
    }

    #[test]
    fn injected_perturbation_is_measured() {
        let grid = TimeGrid::new(0.0, 1.0, 4).unwrap();
        let base = identity(2) * c(0.5, 0.0);
        let a = StatePath {
            grid,
            states: vec![base.clone(); 5],
        };
        let mut b = a.clone();
        b.states[3] = &base + pauli::z() * c(0.01, 0.0);
        let r = compare_paths(&a, &b, 0.0, 1e-3).unwrap();
        assert!((r.max_distance - 0.01).abs() < 1e-15);
        assert_eq!(r.argmax_t, 0.75);
        assert!(!r.passed);
        let late = compare_paths(&a, &b, 0.8, 1e-3).unwrap();
        assert_eq!(late.times, vec![1.0]);
    }

    #[test]
    fn mismatched_grids_are_rejected() {
        let a = StatePath {
            grid: TimeGrid::new(0.0, 1.0, 4).unwrap(),
            states: vec![identity(2); 5],
        };
        let b = StatePath {
            grid: TimeGrid::new(0.0, 2.0, 4).unwrap(),
            states: vec![identity(2); 5],
        };
        assert!(compare_paths(&a, &b, 0.0, 1.0).is_err());
    }

    #[test]
    fn identical_hamiltonians_give_zero_bound() {
        let grid = TimeGrid::new(0.0, 1.0, 10).unwrap();
        let h = vec![pauli::x(); 11];
        assert!(unitary_error_bound(&grid, &h, &h, false)
            .unwrap()
            .iter()
            .all(|&b| b == 0.0));
    }
}
