use serde::{Deserialize, Serialize};

use crate::error::{DilateError, Result};

/// Scalar time dependence of a generator term. Rates are in 1/time and
/// angular frequencies in rad/time.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum TimeProfile {
    Constant {
        value: f64,
    },
    /// `amplitude · e^(rate·t) + offset`
    Exponential {
        amplitude: f64,
        rate: f64,
        #[serde(default)]
        offset: f64,
    },
    /// `amplitude · sin(frequency·t + phase) + offset`
    Sinusoidal {
        amplitude: f64,
        frequency: f64,
        #[serde(default)]
        phase: f64,
        #[serde(default)]
        offset: f64,
    },
    /// `Σ_k coefficients[k] · t^k`
    Polynomial {
        coefficients: Vec<f64>,
    },
    /// Piecewise-linear through `(times[k], values[k])`; no extrapolation.
    Tabulated {
        times: Vec<f64>,
        values: Vec<f64>,
    },
}

impl TimeProfile {
    pub fn constant(value: f64) -> Self {
        TimeProfile::Constant { value }
    }

    pub fn validate(&self) -> Result<()> {
        let finite = |x: f64, what: &str| {
            if x.is_finite() {
                Ok(())
            } else {
                Err(DilateError::InvalidInput(format!(
                    "profile {what} must be finite"
                )))
            }
        };
        match self {
            TimeProfile::Constant { value } => finite(*value, "value"),
            TimeProfile::Exponential {
                amplitude,
                rate,
                offset,
            } => {
                finite(*amplitude, "amplitude")?;
                finite(*rate, "rate")?;
                finite(*offset, "offset")
            }
            TimeProfile::Sinusoidal {
                amplitude,
                frequency,
                phase,
                offset,
            } => {
                finite(*amplitude, "amplitude")?;
                finite(*frequency, "frequency")?;
                finite(*phase, "phase")?;
                finite(*offset, "offset")
            }
            TimeProfile::Polynomial { coefficients } => coefficients
                .iter()
                .try_for_each(|c| finite(*c, "coefficient")),
            TimeProfile::Tabulated { times, values } => {
                if times.len() < 2 || times.len() != values.len() {
                    return Err(DilateError::InvalidInput(
                        "tabulated profile needs at least two (time, value) pairs of equal length"
                            .into(),
                    ));
                }
                if times.windows(2).any(|w| w[1] <= w[0]) {
                    return Err(DilateError::InvalidInput(
                        "tabulated profile times must be strictly increasing".into(),
                    ));
                }
                values
                    .iter()
                    .chain(times)
                    .try_for_each(|c| finite(*c, "sample"))
            }
        }
    }

    fn tabulated_segment(times: &[f64], t: f64) -> Result<usize> {
        let (start, end) = (times[0], times[times.len() - 1]);
        if !(start..=end).contains(&t) {
            return Err(DilateError::ProfileDomain { t, start, end });
        }
        Ok(times.partition_point(|&x| x <= t).clamp(1, times.len() - 1) - 1)
    }

    pub fn eval(&self, t: f64) -> Result<f64> {
        Ok(match self {
            TimeProfile::Constant { value } => *value,
            TimeProfile::Exponential {
                amplitude,
                rate,
                offset,
            } => amplitude * (rate * t).exp() + offset,
            TimeProfile::Sinusoidal {
                amplitude,
                frequency,
                phase,
                offset,
            } => amplitude * (frequency * t + phase).sin() + offset,
            TimeProfile::Polynomial { coefficients } => {
                coefficients.iter().rev().fold(0.0, |acc, c| acc * t + c)
            }
            TimeProfile::Tabulated { times, values } => {
                let k = Self::tabulated_segment(times, t)?;
                let s = (t - times[k]) / (times[k + 1] - times[k]);
                values[k] + s * (values[k + 1] - values[k])
            }
        })
    }

    /// `∫₀ᵗ profile(t′) dt′`
    pub fn integral(&self, t: f64) -> Result<f64> {
        Ok(match self {
            TimeProfile::Constant { value } => value * t,
            TimeProfile::Exponential {
                amplitude,
                rate,
                offset,
            } => {
                let growth = if rate.abs() * t.abs() < 1e-8 {
                    t * (1.0 + 0.5 * rate * t)
                } else {
                    (rate * t).exp_m1() / rate
                };
                amplitude * growth + offset * t
            }
            TimeProfile::Sinusoidal {
                amplitude,
                frequency,
                phase,
                offset,
            } => {
                let osc = if *frequency == 0.0 {
                    phase.sin() * t
                } else {
                    (phase.cos() - (frequency * t + phase).cos()) / frequency
                };
                amplitude * osc + offset * t
            }
            TimeProfile::Polynomial { coefficients } => coefficients
                .iter()
                .enumerate()
                .map(|(k, c)| c * t.powi(k as i32 + 1) / (k as f64 + 1.0))
                .sum(),
            TimeProfile::Tabulated { times, values: _ } => {
                let (lo, hi) = if t >= 0.0 { (0.0, t) } else { (t, 0.0) };
                Self::tabulated_segment(times, lo)?;
                Self::tabulated_segment(times, hi)?;
                let piece = |a: f64, b: f64| -> Result<f64> {
                    Ok(0.5 * (b - a) * (self.eval(a)? + self.eval(b)?))
                };
                let mut acc = 0.0;
                let mut cursor = lo;
                for &knot in times.iter().filter(|&&x| x > lo && x < hi) {
                    acc += piece(cursor, knot)?;
                    cursor = knot;
                }
                acc += piece(cursor, hi)?;
                if t >= 0.0 {
                    acc
                } else {
                    -acc
                }
            }
        })
    }

    /// Whether the profile can be evaluated on `[start, end]`.
    pub fn covers(&self, start: f64, end: f64) -> bool {
        match self {
            TimeProfile::Tabulated { times, .. } => {
                times[0] <= start && end <= times[times.len() - 1]
            }
            _ => true,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn numeric_integral(p: &TimeProfile, t: f64) -> f64 {
        let n = 20_000;
        let h = t / n as f64;
        (0..n)
            .map(|k| {
                let a = k as f64 * h;
                h / 6.0
                    * (p.eval(a).unwrap()
                        + 4.0 * p.eval(a + 0.5 * h).unwrap()
                        + p.eval(a + h).unwrap())
            })
            .sum()
    }

    #[test]
    fn closed_form_integrals_match_quadrature() {
        let profiles = [
            TimeProfile::constant(0.7),
            TimeProfile::Exponential {
                amplitude: 1.5,
                rate: -0.8,
                offset: 0.1,
            },
            TimeProfile::Sinusoidal {
                amplitude: 2.0,
                frequency: 1.3,
                phase: 0.2,
                offset: -0.1,
            },
            TimeProfile::Polynomial {
                coefficients: vec![0.5, -1.0, 0.25],
            },
            TimeProfile::Tabulated {
                times: vec![0.0, 0.5, 2.0, 4.0],
                values: vec![0.0, 1.0, -0.5, 0.3],
            },
        ];
        for p in &profiles {
            p.validate().unwrap();
            let t = 3.1;
            let exact = p.integral(t).unwrap();
            assert!((exact - numeric_integral(p, t)).abs() < 1e-9, "{p:?}");
        }
    }

    #[test]
    fn tabulated_interpolates_linearly_and_rejects_extrapolation() {
        let p = TimeProfile::Tabulated {
            times: vec![0.0, 1.0, 3.0],
            values: vec![1.0, 3.0, -1.0],
        };
        assert_eq!(p.eval(0.5).unwrap(), 2.0);
        assert_eq!(p.eval(2.0).unwrap(), 1.0);
        assert_eq!(p.eval(3.0).unwrap(), -1.0);
        assert!(matches!(
            p.eval(3.5),
            Err(DilateError::ProfileDomain { .. })
        ));
        assert!(p.eval(-0.1).is_err());
        assert!(p.integral(4.0).is_err());
    }

    #[test]
    fn tabulated_validation() {
        let bad = TimeProfile::Tabulated {
            times: vec![0.0, 0.0],
            values: vec![1.0, 2.0],
        };
        assert!(bad.validate().is_err());
        let short = TimeProfile::Tabulated {
            times: vec![0.0],
            values: vec![1.0],
        };
        assert!(short.validate().is_err());
    }
}
