use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use super::expo::{self, ExpPiece};
use crate::error::{Error, Result};

/// Shape family of a temporal mode. Frequencies in Hz, times in seconds.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "snake_case")]
pub enum ModeShape {
    /// Lorentzian-filtered trigger mode `exp(-2 pi kappa (t_c - t))` for `t <= t_c`.
    TriggerExponential { filter_hwhm_hz: f64, click_time: f64 },
    /// Product of two Lorentzians in frequency:
    /// `kappa exp(-pi gamma |t - c|) - gamma exp(-pi kappa |t - c|)`.
    /// `gamma_hz` and `kappa_hz` are full linewidths (FWHM).
    Ansatz { gamma_hz: f64, kappa_hz: f64, center: f64 },
    /// Piecewise-linear interpolation of samples, zero outside the grid.
    Sampled { start: f64, step: f64, values: Vec<f64> },
}

/// A real temporal mode function `u(t) = scale * shape(t)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TemporalMode {
    shape: ModeShape,
    scale: f64,
}

impl TemporalMode {
    pub fn trigger(filter_hwhm_hz: f64, click_time: f64) -> Result<Self> {
        if !(filter_hwhm_hz.is_finite() && filter_hwhm_hz > 0.0) {
            return Err(Error::param("filter_hwhm_hz", "must be > 0"));
        }
        TemporalMode {
            shape: ModeShape::TriggerExponential {
                filter_hwhm_hz,
                click_time,
            },
            scale: 1.0,
        }
        .normalized()
    }

    pub fn ansatz(gamma_hz: f64, kappa_hz: f64, center: f64) -> Result<Self> {
        for (name, v) in [("gamma_hz", gamma_hz), ("kappa_hz", kappa_hz)] {
            if !(v.is_finite() && v > 0.0) {
                return Err(Error::param(name, format!("{v} must be > 0")));
            }
        }
        if (gamma_hz - kappa_hz).abs() <= 1e-9 * gamma_hz.max(kappa_hz) {
            return Err(Error::param("kappa_hz", "ansatz degenerates for gamma == kappa"));
        }
        TemporalMode {
            shape: ModeShape::Ansatz {
                gamma_hz,
                kappa_hz,
                center,
            },
            scale: 1.0,
        }
        .normalized()
    }

    /// Samples taken as given; call [`TemporalMode::normalized`] to normalize.
    pub fn sampled(start: f64, step: f64, values: Vec<f64>) -> Result<Self> {
        if !(step.is_finite() && step > 0.0) {
            return Err(Error::param("step", "must be > 0"));
        }
        if values.len() < 2 || values.iter().any(|v| !v.is_finite()) {
            return Err(Error::param("values", "need at least two finite samples"));
        }
        Ok(TemporalMode {
            shape: ModeShape::Sampled { start, step, values },
            scale: 1.0,
        })
    }

    pub fn normalized(mut self) -> Result<Self> {
        self.scale = 1.0;
        let n2 = self.norm_squared();
        if !(n2.is_finite() && n2 > 0.0) {
            return Err(Error::ModeNotNormalized(n2));
        }
        self.scale = 1.0 / n2.sqrt();
        Ok(self)
    }

    pub fn shape(&self) -> &ModeShape {
        &self.shape
    }

    pub fn scale(&self) -> f64 {
        self.scale
    }

    pub fn family(&self) -> &'static str {
        match self.shape {
            ModeShape::TriggerExponential { .. } => "trigger-exponential",
            ModeShape::Ansatz { .. } => "ansatz",
            ModeShape::Sampled { .. } => "custom-sampled",
        }
    }

    /// Exponential pieces of the scaled mode, for the analytic families.
    pub(crate) fn pieces(&self) -> Option<Vec<ExpPiece>> {
        let raw = match self.shape {
            ModeShape::TriggerExponential {
                filter_hwhm_hz,
                click_time,
            } => vec![ExpPiece {
                coef: 1.0,
                rate: 2.0 * PI * filter_hwhm_hz,
                anchor: click_time,
                lo: f64::NEG_INFINITY,
                hi: click_time,
            }],
            ModeShape::Ansatz {
                gamma_hz,
                kappa_hz,
                center,
            } => {
                let mut v = Vec::with_capacity(4);
                for (coef, rate) in [(kappa_hz, PI * gamma_hz), (-gamma_hz, PI * kappa_hz)] {
                    v.push(ExpPiece {
                        coef,
                        rate,
                        anchor: center,
                        lo: f64::NEG_INFINITY,
                        hi: center,
                    });
                    v.push(ExpPiece {
                        coef,
                        rate: -rate,
                        anchor: center,
                        lo: center,
                        hi: f64::INFINITY,
                    });
                }
                v
            }
            ModeShape::Sampled { .. } => return None,
        };
        Some(expo::scale_all(&raw, self.scale))
    }

    pub fn eval(&self, t: f64) -> f64 {
        match &self.shape {
            ModeShape::Sampled { start, step, values } => {
                let s = (t - start) / step;
                if s < 0.0 || s > (values.len() - 1) as f64 {
                    return 0.0;
                }
                let i = (s.floor() as usize).min(values.len() - 2);
                let w = s - i as f64;
                self.scale * (values[i] * (1.0 - w) + values[i + 1] * w)
            }
            _ => self
                .pieces()
                .expect("analytic family")
                .iter()
                .map(|p| p.value(t))
                .sum(),
        }
    }

    /// `int u(t)^2 dt`, exact for every family.
    pub fn norm_squared(&self) -> f64 {
        match &self.shape {
            ModeShape::Sampled { step, values, .. } => {
                let s: f64 = values
                    .windows(2)
                    .map(|w| (w[0] * w[0] + w[0] * w[1] + w[1] * w[1]) / 3.0)
                    .sum();
                self.scale * self.scale * s * step
            }
            _ => expo::norm_squared(&self.pieces().expect("analytic family")),
        }
    }

    pub fn is_normalized(&self) -> bool {
        (self.norm_squared() - 1.0).abs() <= 1e-10
    }

    /// True if `u(t) = 0` for all `t > t_c`.
    pub fn is_causal(&self, t_c: f64) -> bool {
        match &self.shape {
            ModeShape::TriggerExponential { click_time, .. } => *click_time <= t_c,
            ModeShape::Ansatz { .. } => false,
            ModeShape::Sampled { start, step, values } => values
                .iter()
                .enumerate()
                .all(|(i, v)| *v == 0.0 || start + i as f64 * step <= t_c),
        }
    }

    /// Finite interval outside which `|u|` is negligible (< 1e-19 of peak).
    pub fn support(&self) -> (f64, f64) {
        match &self.shape {
            ModeShape::TriggerExponential {
                filter_hwhm_hz,
                click_time,
            } => (click_time - 44.0 / (2.0 * PI * filter_hwhm_hz), *click_time),
            ModeShape::Ansatz {
                gamma_hz,
                kappa_hz,
                center,
            } => {
                let w = 44.0 / (PI * gamma_hz.min(*kappa_hz));
                (center - w, center + w)
            }
            ModeShape::Sampled { start, step, values } => {
                (*start, start + step * (values.len() - 1) as f64)
            }
        }
    }

    /// Points where `u` is not smooth.
    pub fn breakpoints(&self) -> Vec<f64> {
        match &self.shape {
            ModeShape::TriggerExponential { click_time, .. } => vec![*click_time],
            ModeShape::Ansatz { center, .. } => vec![*center],
            ModeShape::Sampled { start, step, values } => {
                (0..values.len()).map(|i| start + i as f64 * step).collect()
            }
        }
    }

    /// Sample on `n` points `start + i*step`, scaled so the discrete vector has
    /// unit Euclidean norm.
    pub fn discretize(&self, start: f64, step: f64, n: usize) -> Vec<f64> {
        let mut v: Vec<f64> = (0..n).map(|i| self.eval(start + i as f64 * step)).collect();
        let norm = v.iter().map(|x| x * x).sum::<f64>().sqrt();
        if norm > 0.0 {
            v.iter_mut().for_each(|x| *x /= norm);
        }
        v
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::quadrature::{integrate, QuadOptions};

    fn numeric_norm(m: &TemporalMode) -> f64 {
        let (a, b) = m.support();
        integrate(|t| m.eval(t).powi(2), a, b, &m.breakpoints(), QuadOptions::default())
    }

    #[test]
    fn families_are_normalized() {
        let t = TemporalMode::trigger(48e6, 1e-7).unwrap();
        let u = TemporalMode::ansatz(9e6, 48e6, 0.0).unwrap();
        for m in [&t, &u] {
            assert!(m.is_normalized());
            assert!((numeric_norm(m) - 1.0).abs() < 1e-10, "{}", numeric_norm(m));
        }
        let s = TemporalMode::sampled(0.0, 0.1, vec![0.0, 1.0, 2.0, 1.0, 0.0])
            .unwrap()
            .normalized()
            .unwrap();
        assert!(s.is_normalized());
        assert!((numeric_norm(&s) - 1.0).abs() < 1e-12);
    }

    #[test]
    fn trigger_is_causal() {
        let t = TemporalMode::trigger(48e6, 0.0).unwrap();
        assert!(t.is_causal(0.0));
        assert_eq!(t.eval(1e-12), 0.0);
        assert!(t.eval(-1e-9) > 0.0);
        assert!(!TemporalMode::ansatz(9e6, 48e6, 0.0).unwrap().is_causal(0.0));
    }

    #[test]
    fn ansatz_rejects_equal_widths() {
        assert!(TemporalMode::ansatz(10e6, 10e6, 0.0).is_err());
    }

    #[test]
    fn ansatz_is_even_about_center() {
        let u = TemporalMode::ansatz(9e6, 48e6, 2e-8).unwrap();
        for dt in [1e-9, 1e-8, 5e-8] {
            assert!((u.eval(2e-8 + dt) - u.eval(2e-8 - dt)).abs() < 1e-9 * u.eval(2e-8));
        }
    }
}
