//! Cutoff experiments on the dephasing dilation and the decay-curve dataset.
//!
//! The dephasing dilation is `h(t) σz⊗σy` with
//! `h(t) = γ′ / (2√(e^{2γ′t} − 1))`. A cutoff `C` replaces `h` by
//! `min(h, C)`, which caps it on `[0, t_c]` with
//! `t_c = ln(1 + γ′²/4C²) / 2γ′`.

use rayon::prelude::*;
use serde::Serialize;

use crate::channel::DensityMatrix;
use crate::error::{DilateError, Result};
use crate::generators::{evolve_state_master, presets, StatePath, TimeGrid};
use crate::linalg::{c, CMatrix, CVector};
use crate::verify::fixtures::{dephasing_generator, exp_cubic_unit, resolve_spin_boson};
use crate::verify::{
    evolve_dilated, unitary_error_bound, unitary_errors, EvolveOptions, HamiltonianSource,
};

/// Dephasing dilation with its prefactor capped at `cutoff`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ClampedDephasing {
    /// `γ′`, the rate in the closed form.
    pub rate: f64,
    pub cutoff: f64,
}

impl ClampedDephasing {
    pub fn new(rate: f64, cutoff: f64) -> Result<Self> {
        if !(rate > 0.0 && rate.is_finite()) || !(cutoff > 0.0) {
            return Err(DilateError::InvalidInput(format!(
                "need rate > 0 and cutoff > 0, got {rate} and {cutoff}"
            )));
        }
        Ok(Self { rate, cutoff })
    }

    pub fn window_end(&self) -> f64 {
        if self.cutoff.is_infinite() {
            return 0.0;
        }
        (self.rate * self.rate / (4.0 * self.cutoff * self.cutoff)).ln_1p() / (2.0 * self.rate)
    }

    pub fn exact_prefactor(&self, t: f64) -> f64 {
        if t <= 0.0 {
            return f64::INFINITY;
        }
        self.rate / (2.0 * (2.0 * self.rate * t).exp_m1().sqrt())
    }

    pub fn applied_prefactor(&self, t: f64) -> f64 {
        self.exact_prefactor(t).min(self.cutoff)
    }

    pub fn exact_angle(&self, t: f64) -> f64 {
        0.5 * (-self.rate * t.max(0.0)).exp().acos()
    }

    pub fn applied_angle(&self, t: f64) -> f64 {
        let tc = self.window_end();
        if t <= tc {
            self.cutoff * t
        } else {
            self.cutoff * tc + self.exact_angle(t) - self.exact_angle(tc)
        }
    }

    /// `∫₀^∞ (h − C)₊`, the limit of the integrated bound.
    pub fn bound_limit(&self) -> f64 {
        let tc = self.window_end();
        self.exact_angle(tc) - self.cutoff * tc
    }
}

impl HamiltonianSource for ClampedDephasing {
    fn system_dim(&self) -> usize {
        2
    }

    fn ancilla_dim(&self) -> usize {
        2
    }

    fn hamiltonian(&self, t: f64) -> Result<CMatrix> {
        if t <= 0.0 && self.cutoff.is_infinite() {
            return Err(DilateError::Divergent { t });
        }
        Ok(dephasing_generator() * c(self.applied_prefactor(t), 0.0))
    }
}

/// Actual unitary error against the integrated bound for one cutoff.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BoundExperiment {
    pub cutoff: f64,
    pub window_end: f64,
    pub times: Vec<f64>,
    /// `‖U(t) − U_T(t)‖` from the closed-form unitaries.
    pub actual: Vec<f64>,
    pub bound: Vec<f64>,
    pub final_bound: f64,
    pub bound_limit: f64,
    /// `final_bound · 8C / γ′`
    pub ratio: f64,
    pub min_margin: f64,
    pub dominated: bool,
}

/// Evaluate the bound on a fine grid over `[0, 4t_c]` followed by a coarse
/// grid up to `t_end`.
pub fn cutoff_bound_experiment(
    rate: f64,
    cutoff: f64,
    fine_steps: usize,
    t_end: f64,
    coarse_dt: f64,
) -> Result<BoundExperiment> {
    let fx = ClampedDephasing::new(rate, cutoff)?;
    let tc = fx.window_end();
    let (fine, coarse) = split_grids(4.0 * tc, fine_steps, t_end, coarse_dt)?;
    let x = dephasing_generator();

    let segment = |grid: &TimeGrid, singular: bool| -> Result<(Vec<f64>, Vec<f64>, Vec<f64>)> {
        let times = grid.times();
        let target: Vec<CMatrix> = times
            .iter()
            .map(|&t| {
                if t == 0.0 {
                    CMatrix::zeros(4, 4)
                } else {
                    &x * c(fx.exact_prefactor(t), 0.0)
                }
            })
            .collect();
        let applied: Vec<CMatrix> = times
            .iter()
            .map(|&t| &x * c(fx.applied_prefactor(t), 0.0))
            .collect();
        let bound = unitary_error_bound(grid, &target, &applied, singular)?;
        let u: Vec<CMatrix> = times
            .iter()
            .map(|&t| exp_cubic_unit(&x, fx.exact_angle(t)))
            .collect();
        let ut: Vec<CMatrix> = times
            .iter()
            .map(|&t| exp_cubic_unit(&x, fx.applied_angle(t)))
            .collect();
        Ok((times, unitary_errors(&u, &ut), bound))
    };
    let (mut times, mut actual, mut bound) = segment(&fine, true)?;
    let offset = *bound.last().expect("grid is non-empty");
    let (t2, a2, b2) = segment(&coarse, false)?;
    times.extend_from_slice(&t2[1..]);
    actual.extend_from_slice(&a2[1..]);
    bound.extend(b2[1..].iter().map(|b| b + offset));

    let min_margin = bound
        .iter()
        .zip(&actual)
        .map(|(b, a)| b - a)
        .fold(f64::INFINITY, f64::min);
    let final_bound = *bound.last().expect("grid is non-empty");
    Ok(BoundExperiment {
        cutoff,
        window_end: tc,
        times,
        actual,
        bound,
        final_bound,
        bound_limit: fx.bound_limit(),
        ratio: final_bound * 8.0 * cutoff / rate,
        dominated: min_margin >= 0.0,
        min_margin,
    })
}

fn split_grids(
    t_split: f64,
    fine_steps: usize,
    t_end: f64,
    coarse_dt: f64,
) -> Result<(TimeGrid, TimeGrid)> {
    if !(t_split > 0.0 && t_split < t_end) || !(coarse_dt > 0.0) {
        return Err(DilateError::InvalidInput(format!(
            "cannot split [0, {t_end}] at {t_split} with step {coarse_dt}"
        )));
    }
    let fine = TimeGrid::new(0.0, t_split, fine_steps)?;
    let n = ((t_end - t_split) / coarse_dt).ceil().max(1.0) as usize;
    Ok((fine, TimeGrid::new(t_split, t_end, n)?))
}

/// `⟨+|ρ(t)|+⟩` together with the master-equation value at the same times.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SurvivalCurve {
    /// `None` for the uncut channel.
    pub cutoff: Option<f64>,
    pub times: Vec<f64>,
    pub survival: Vec<f64>,
    pub exact: Vec<f64>,
}

impl SurvivalCurve {
    pub fn max_deviation(&self) -> f64 {
        self.survival
            .iter()
            .zip(&self.exact)
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max)
    }
}

/// Least-squares fit `1 − survival ≈ a·t + b·t²` on `(0, t_c]`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ShortTimeFit {
    pub cutoff: f64,
    pub window_end: f64,
    pub linear: f64,
    pub quadratic: f64,
    /// RMS residual relative to the RMS of the data.
    pub relative_residual: f64,
    /// `max (1 − survival)/t²` over the window; `1 − survival ≤ K t²` there.
    pub envelope: f64,
    pub quadratic_ok: bool,
}

fn fit_short_time(curve: &SurvivalCurve, tc: f64) -> ShortTimeFit {
    let pts: Vec<(f64, f64)> = curve
        .times
        .iter()
        .zip(&curve.survival)
        .filter(|(t, _)| **t > 0.0 && **t <= tc * (1.0 + 1e-12))
        .map(|(t, s)| (t / tc, 1.0 - s))
        .collect();
    let (mut s11, mut s12, mut s22, mut r1, mut r2) = (0.0, 0.0, 0.0, 0.0, 0.0);
    for &(x, y) in &pts {
        s11 += x * x;
        s12 += x * x * x;
        s22 += x * x * x * x;
        r1 += x * y;
        r2 += x * x * y;
    }
    let det = s11 * s22 - s12 * s12;
    let a = (r1 * s22 - r2 * s12) / det;
    let b = (s11 * r2 - s12 * r1) / det;
    let (mut res2, mut data2) = (0.0, 0.0);
    for &(x, y) in &pts {
        res2 += (y - a * x - b * x * x).powi(2);
        data2 += y * y;
    }
    let relative_residual = (res2 / data2).sqrt();
    let envelope = pts
        .iter()
        .map(|&(x, y)| y / (x * x * tc * tc))
        .fold(0.0, f64::max);
    ShortTimeFit {
        cutoff: curve.cutoff.unwrap_or(f64::INFINITY),
        window_end: tc,
        linear: a / tc,
        quadratic: b / (tc * tc),
        relative_residual,
        envelope,
        quadratic_ok: relative_residual < 1e-2 && a.abs() < 1e-2 * b.abs(),
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Fig2Options {
    pub t_end: f64,
    pub dt: f64,
    /// Steps of the short-time grid on `[0, 4t_c]`.
    pub inset_steps: usize,
    /// RK4 substeps per coarse interval.
    pub substeps: usize,
}

impl Default for Fig2Options {
    fn default() -> Self {
        Self {
            t_end: 5.0,
            dt: 1e-3,
            inset_steps: 2000,
            substeps: 16,
        }
    }
}

/// Decay of `|+⟩` under clamped dephasing dilations.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Fig2Dataset {
    pub gamma: f64,
    pub rate_scale: f64,
    pub cutoffs: Vec<f64>,
    pub exact: SurvivalCurve,
    /// Full curves, short-time grid followed by the coarse grid.
    pub curves: Vec<SurvivalCurve>,
    /// The short-time part of each curve.
    pub insets: Vec<SurvivalCurve>,
    pub fits: Vec<ShortTimeFit>,
    /// Largest `|survival − exact|` per cutoff.
    pub max_deviation: Vec<f64>,
    /// Whether `max_deviation` strictly decreases with increasing cutoff.
    pub monotone: bool,
}

fn plus_state() -> DensityMatrix {
    DensityMatrix::pure(&CVector::from_vec(vec![c(1.0, 0.0), c(1.0, 0.0)]))
}

fn survival(states: &[CMatrix]) -> Vec<f64> {
    states.iter().map(|s| 0.5 + s[(0, 1)].re).collect()
}

/// Simulate the clamped dilations for every cutoff (in absolute units of
/// 1/time) against the dephasing master equation at rate `gamma`. The
/// closed-form rate is fitted from the master equation first.
pub fn fig2_experiment(gamma: f64, cutoffs: &[f64], opts: &Fig2Options) -> Result<Fig2Dataset> {
    if !(gamma > 0.0) || cutoffs.is_empty() {
        return Err(DilateError::InvalidInput(
            "fig2 needs gamma > 0 and at least one cutoff".into(),
        ));
    }
    let scale = resolve_spin_boson(gamma)?.rate_scale;
    let spec = presets::dephasing(gamma);
    let rho = plus_state();
    let oracle = |grid: &TimeGrid| -> Result<StatePath> { evolve_state_master(&spec, &rho, grid) };

    let n = (opts.t_end / opts.dt).round().max(1.0) as usize;
    let main = TimeGrid::new(0.0, opts.t_end, n)?;
    let exact = SurvivalCurve {
        cutoff: None,
        times: main.times(),
        survival: survival(&oracle(&main)?.states),
        exact: Vec::new(),
    };
    let exact = SurvivalCurve {
        exact: exact.survival.clone(),
        ..exact
    };

    let runs: Vec<(SurvivalCurve, SurvivalCurve, ShortTimeFit)> = cutoffs
        .par_iter()
        .map(|&cut| -> Result<_> {
            let fx = ClampedDephasing::new(gamma * scale, cut)?;
            let tc = fx.window_end();
            let (fine, coarse) = split_grids(4.0 * tc, opts.inset_steps, opts.t_end, opts.dt)?;
            let first = evolve_dilated(
                &fx,
                &rho,
                &fine,
                &EvolveOptions {
                    keep_unitaries: true,
                    ..Default::default()
                },
            )?;
            let u_split = first.unitaries.as_ref().and_then(|u| u.last().cloned());
            let second = evolve_dilated(
                &fx,
                &rho,
                &coarse,
                &EvolveOptions {
                    initial_unitary: u_split,
                    substeps: opts.substeps,
                    ..Default::default()
                },
            )?;
            let inset = SurvivalCurve {
                cutoff: Some(cut),
                times: fine.times(),
                survival: survival(&first.reduced.states),
                exact: survival(&oracle(&fine)?.states),
            };
            let mut full = inset.clone();
            full.times.extend_from_slice(&coarse.times()[1..]);
            full.survival
                .extend_from_slice(&survival(&second.reduced.states)[1..]);
            full.exact
                .extend_from_slice(&survival(&oracle(&coarse)?.states)[1..]);
            let fit = fit_short_time(&inset, tc);
            Ok((full, inset, fit))
        })
        .collect::<Result<_>>()?;

    let mut order: Vec<usize> = (0..cutoffs.len()).collect();
    order.sort_by(|&a, &b| cutoffs[a].total_cmp(&cutoffs[b]));
    let max_deviation: Vec<f64> = runs
        .iter()
        .map(|(full, _, _)| full.max_deviation())
        .collect();
    let monotone = order
        .windows(2)
        .all(|w| max_deviation[w[1]] < max_deviation[w[0]]);
    let (mut curves, mut insets, mut fits) = (Vec::new(), Vec::new(), Vec::new());
    for (full, inset, fit) in runs {
        curves.push(full);
        insets.push(inset);
        fits.push(fit);
    }
    Ok(Fig2Dataset {
        gamma,
        rate_scale: scale,
        cutoffs: cutoffs.to_vec(),
        exact,
        curves,
        insets,
        fits,
        max_deviation,
        monotone,
    })
}
