//! Finite-difference, interpolation and quadrature rules on uniform grids.
//!
//! All rules are built from Fornberg's recursion for finite-difference
//! weights on arbitrary nodes, so central and one-sided stencils of the same
//! width share one code path.

use crate::linalg::{zeros, CMatrix};

/// Points in the derivative stencil (8th order when centred).
pub const DERIVATIVE_POINTS: usize = 9;

/// Points in the interpolation stencil (degree-7 Lagrange).
pub const INTERPOLATION_POINTS: usize = 8;

/// Weights `w_j` such that `f^(order)(x0) ≈ Σ_j w_j f(nodes[j])`.
pub fn fornberg_weights(x0: f64, nodes: &[f64], order: usize) -> Vec<f64> {
    let n = nodes.len();
    assert!(n > order, "need more nodes than the derivative order");
    let mut c = vec![vec![0.0; order + 1]; n];
    let mut c1 = 1.0;
    let mut c4 = nodes[0] - x0;
    c[0][0] = 1.0;
    for i in 1..n {
        let mn = i.min(order);
        let mut c2 = 1.0;
        let c5 = c4;
        c4 = nodes[i] - x0;
        for j in 0..i {
            let c3 = nodes[i] - nodes[j];
            c2 *= c3;
            if j == i - 1 {
                for k in (1..=mn).rev() {
                    c[i][k] = c1 * (k as f64 * c[i - 1][k - 1] - c5 * c[i - 1][k]) / c2;
                }
                c[i][0] = -c1 * c5 * c[i - 1][0] / c2;
            }
            for k in (1..=mn).rev() {
                c[j][k] = (c4 * c[j][k] - k as f64 * c[j][k - 1]) / c3;
            }
            c[j][0] = c4 * c[j][0] / c3;
        }
        c1 = c2;
    }
    c.into_iter().map(|row| row[order]).collect()
}

/// Start of a window of `width` consecutive indices inside `0..len`, as
/// centred on `center` (a possibly fractional position) as the bounds allow.
fn window_start(center: f64, width: usize, len: usize) -> usize {
    let width = width.min(len);
    let ideal = (center - (width as f64 - 1.0) / 2.0).round();
    let max_start = (len - width) as f64;
    ideal.clamp(0.0, max_start) as usize
}

/// Stencil `(start, weights)` for the first derivative at sample `index` of a
/// sequence of `len` samples spaced by `dt`.
pub fn derivative_stencil(index: usize, len: usize, dt: f64) -> (usize, Vec<f64>) {
    let width = DERIVATIVE_POINTS.min(len);
    let start = window_start(index as f64, width, len);
    let nodes: Vec<f64> = (start..start + width).map(|k| k as f64).collect();
    let w = fornberg_weights(index as f64, &nodes, 1);
    (start, w.into_iter().map(|x| x / dt).collect())
}

/// Interpolation stencil `(start, weights)` at fractional sample position `x`.
pub fn interpolation_stencil(x: f64, len: usize) -> (usize, Vec<f64>) {
    let width = INTERPOLATION_POINTS.min(len);
    let start = window_start(x, width, len);
    let nodes: Vec<f64> = (start..start + width).map(|k| k as f64).collect();
    (start, fornberg_weights(x, &nodes, 0))
}

fn combine(samples: &[CMatrix], start: usize, weights: &[f64]) -> CMatrix {
    let (r, c) = samples[start].shape();
    let mut acc = zeros(r, c);
    for (k, &w) in weights.iter().enumerate() {
        if w != 0.0 {
            acc += &samples[start + k] * num_complex::Complex64::new(w, 0.0);
        }
    }
    acc
}

/// First derivative of every sample of a uniformly spaced matrix sequence.
pub fn differentiate(samples: &[CMatrix], dt: f64) -> Vec<CMatrix> {
    let len = samples.len();
    if len < 2 {
        return samples
            .iter()
            .map(|s| zeros(s.nrows(), s.ncols()))
            .collect();
    }
    (0..len)
        .map(|n| {
            let (start, w) = derivative_stencil(n, len, dt);
            combine(samples, start, &w)
        })
        .collect()
}

pub fn differentiate_scalar(samples: &[f64], dt: f64) -> Vec<f64> {
    let len = samples.len();
    if len < 2 {
        return vec![0.0; len];
    }
    (0..len)
        .map(|n| {
            let (start, w) = derivative_stencil(n, len, dt);
            w.iter()
                .enumerate()
                .map(|(k, wk)| wk * samples[start + k])
                .sum()
        })
        .collect()
}

/// Interpolate a uniformly spaced matrix sequence (first sample at `t0`) at `t`.
pub fn interpolate(samples: &[CMatrix], t0: f64, dt: f64, t: f64) -> CMatrix {
    let x = (t - t0) / dt;
    let nearest = x.round();
    if (x - nearest).abs() < 1e-12 && nearest >= 0.0 && (nearest as usize) < samples.len() {
        return samples[nearest as usize].clone();
    }
    let (start, w) = interpolation_stencil(x, samples.len());
    combine(samples, start, &w)
}

pub fn interpolate_scalar(samples: &[f64], t0: f64, dt: f64, t: f64) -> f64 {
    let x = (t - t0) / dt;
    let (start, w) = interpolation_stencil(x, samples.len());
    w.iter()
        .enumerate()
        .map(|(k, wk)| wk * samples[start + k])
        .sum()
}

const GAUSS4_NODES: [f64; 4] = [
    0.069_431_844_202_973_71,
    0.330_009_478_207_571_87,
    0.669_990_521_792_428_1,
    0.930_568_155_797_026_3,
];
const GAUSS4_WEIGHTS: [f64; 4] = [
    0.173_927_422_568_726_93,
    0.326_072_577_431_273_07,
    0.326_072_577_431_273_07,
    0.173_927_422_568_726_93,
];

/// Running integral of uniformly spaced samples, integrating the local
/// degree-7 interpolant exactly on each interval. `out[0] = 0`.
pub fn cumulative_integral(samples: &[f64], dt: f64) -> Vec<f64> {
    let len = samples.len();
    let mut out = vec![0.0; len];
    for n in 0..len.saturating_sub(1) {
        let x_mid = n as f64 + 0.5;
        let width = INTERPOLATION_POINTS.min(len);
        let start = window_start(x_mid, width, len);
        let nodes: Vec<f64> = (start..start + width).map(|k| k as f64).collect();
        let mut step = 0.0;
        for (g, gw) in GAUSS4_NODES.iter().zip(GAUSS4_WEIGHTS) {
            let w = fornberg_weights(n as f64 + g, &nodes, 0);
            step += gw
                * w.iter()
                    .enumerate()
                    .map(|(k, wk)| wk * samples[start + k])
                    .sum::<f64>();
        }
        out[n + 1] = out[n] + step * dt;
    }
    out
}

/// Running trapezoidal integral. `out[0] = 0`.
pub fn cumulative_trapezoid(samples: &[f64], dt: f64) -> Vec<f64> {
    let mut out = vec![0.0; samples.len()];
    for n in 1..samples.len() {
        out[n] = out[n - 1] + 0.5 * dt * (samples[n - 1] + samples[n]);
    }
    out
}

/// Integral over `[0, dt]` of an integrand with an inverse-square-root
/// singularity at 0, from its values at `dt` and `2dt`: fits
/// `f(t) ≈ a/√t + b` and integrates exactly.
pub fn inverse_sqrt_first_interval(f_dt: f64, f_2dt: f64, dt: f64) -> f64 {
    let a = (f_dt - f_2dt) * dt.sqrt() / (1.0 - std::f64::consts::FRAC_1_SQRT_2);
    let b = f_dt - a / dt.sqrt();
    2.0 * a * dt.sqrt() + b * dt
}

/// Bisection for a sign change of `f` on `[lo, hi]`, to absolute tolerance `tol`.
pub fn bisect<F: Fn(f64) -> f64>(f: F, mut lo: f64, mut hi: f64, tol: f64) -> Option<f64> {
    let mut f_lo = f(lo);
    let f_hi = f(hi);
    if f_lo == 0.0 {
        return Some(lo);
    }
    if f_hi == 0.0 {
        return Some(hi);
    }
    if f_lo.signum() == f_hi.signum() {
        return None;
    }
    while hi - lo > tol {
        let mid = 0.5 * (lo + hi);
        let f_mid = f(mid);
        if f_mid == 0.0 {
            return Some(mid);
        }
        if f_mid.signum() == f_lo.signum() {
            lo = mid;
            f_lo = f_mid;
        } else {
            hi = mid;
        }
    }
    Some(0.5 * (lo + hi))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn central_weights_match_textbook_stencil() {
        let w = fornberg_weights(0.0, &[-2.0, -1.0, 0.0, 1.0, 2.0], 1);
        let expected = [1.0 / 12.0, -8.0 / 12.0, 0.0, 8.0 / 12.0, -1.0 / 12.0];
        for (a, b) in w.iter().zip(expected) {
            assert!((a - b).abs() < 1e-14);
        }
    }

    #[test]
    fn derivative_is_exact_for_low_degree_polynomials() {
        let dt = 0.1;
        let f: Vec<f64> = (0..20)
            .map(|k| {
                let t = k as f64 * dt;
                3.0 * t.powi(5) - t.powi(2) + 1.0
            })
            .collect();
        let d = differentiate_scalar(&f, dt);
        for (k, dk) in d.iter().enumerate() {
            let t = k as f64 * dt;
            let exact = 15.0 * t.powi(4) - 2.0 * t;
            assert!((dk - exact).abs() < 1e-9, "k={k}: {dk} vs {exact}");
        }
    }

    #[test]
    fn derivative_converges_at_eighth_order_in_the_interior() {
        let err = |dt: f64| {
            let f: Vec<f64> = (0..41).map(|k| (1.0 + k as f64 * dt).sin()).collect();
            let d = differentiate_scalar(&f, dt);
            (d[20] - (1.0 + 20.0 * dt).cos()).abs()
        };
        let ratio = err(0.1) / err(0.05);
        assert!(ratio > 150.0, "ratio {ratio}");
    }

    #[test]
    fn interpolation_reproduces_degree_seven() {
        let p = |t: f64| t.powi(7) - 2.0 * t.powi(3) + 0.5;
        let f: Vec<f64> = (0..12).map(|k| p(k as f64 * 0.3)).collect();
        for &t in &[0.05, 0.45, 1.7, 3.2] {
            assert!((interpolate_scalar(&f, 0.0, 0.3, t) - p(t)).abs() < 1e-9);
        }
    }

    #[test]
    fn cumulative_integral_of_exponential() {
        let dt = 0.01;
        let f: Vec<f64> = (0..301).map(|k| (-(k as f64) * dt).exp()).collect();
        let integral = cumulative_integral(&f, dt);
        for (k, v) in integral.iter().enumerate() {
            let exact = 1.0 - (-(k as f64) * dt).exp();
            assert!((v - exact).abs() < 1e-13, "k={k}");
        }
        let trap = cumulative_trapezoid(&f, dt);
        assert!((trap[300] - (1.0 - (-3.0f64).exp())).abs() < 1e-5);
    }

    #[test]
    fn singular_first_interval_is_exact_for_its_model() {
        let f = |t: f64| 2.0 / t.sqrt() - 3.0;
        let dt: f64 = 1e-3;
        let exact = 4.0 * dt.sqrt() - 3.0 * dt;
        assert!((inverse_sqrt_first_interval(f(dt), f(2.0 * dt), dt) - exact).abs() < 1e-14);
    }

    #[test]
    fn bisection_finds_root() {
        let r = bisect(|x| x * x - 2.0, 0.0, 2.0, 1e-12).unwrap();
        assert!((r - 2f64.sqrt()).abs() < 1e-11);
        assert!(bisect(|x| x * x + 1.0, 0.0, 1.0, 1e-6).is_none());
    }
}
