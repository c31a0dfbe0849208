//! Least-squares fit of measured squeezing spectra to the closed-form OPO
//! spectra, over pump parameter `x` and total efficiency `eta_t`.

use nalgebra::{Matrix2, Vector2};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::gaussian_model::{pump_to_gain, spectrum_db};

/// Measured spectrum: frequencies in Hz, noise powers in dB over shot noise.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SpectrumData {
    pub freq_hz: Vec<f64>,
    pub squeezed_db: Vec<f64>,
    pub antisqueezed_db: Vec<f64>,
}

impl SpectrumData {
    pub fn new(freq_hz: Vec<f64>, squeezed_db: Vec<f64>, antisqueezed_db: Vec<f64>) -> Result<Self> {
        for v in [&squeezed_db, &antisqueezed_db] {
            if v.len() != freq_hz.len() {
                return Err(Error::Dimension {
                    expected: freq_hz.len(),
                    got: v.len(),
                });
            }
        }
        if freq_hz.len() < 2 {
            return Err(Error::InsufficientData {
                got: freq_hz.len(),
                need: 2,
            });
        }
        Ok(SpectrumData {
            freq_hz,
            squeezed_db,
            antisqueezed_db,
        })
    }

    /// Closed-form spectrum on the given frequencies.
    pub fn model(freq_hz: &[f64], cavity_hwhm_hz: f64, pump: f64, eta_t: f64) -> Self {
        let k = 2.0 * std::f64::consts::PI * cavity_hwhm_hz;
        let (sq, anti) = freq_hz
            .iter()
            .map(|f| spectrum_db(k, pump, 2.0 * std::f64::consts::PI * f, eta_t))
            .unzip();
        SpectrumData {
            freq_hz: freq_hz.to_vec(),
            squeezed_db: sq,
            antisqueezed_db: anti,
        }
    }

    pub fn len(&self) -> usize {
        self.freq_hz.len()
    }

    pub fn is_empty(&self) -> bool {
        self.freq_hz.is_empty()
    }

    pub fn to_csv(&self) -> String {
        let mut s = String::from("frequency_hz,squeezed_db,antisqueezed_db\n");
        for i in 0..self.len() {
            s.push_str(&format!(
                "{:.9e},{:.12e},{:.12e}\n",
                self.freq_hz[i], self.squeezed_db[i], self.antisqueezed_db[i]
            ));
        }
        s
    }

    pub fn from_csv(text: &str) -> Result<Self> {
        let mut lines = text.lines().filter(|l| !l.trim().is_empty());
        let header = lines.next().ok_or_else(|| Error::Format("empty spectrum file".into()))?;
        if header.trim() != "frequency_hz,squeezed_db,antisqueezed_db" {
            return Err(Error::Format(format!("unexpected spectrum header `{header}`")));
        }
        let (mut f, mut s, mut a) = (Vec::new(), Vec::new(), Vec::new());
        for (i, line) in lines.enumerate() {
            let v: Vec<f64> = line
                .split(',')
                .map(|t| t.trim().parse::<f64>())
                .collect::<std::result::Result<_, _>>()
                .map_err(|e| Error::Format(format!("spectrum line {}: {e}", i + 2)))?;
            if v.len() != 3 {
                return Err(Error::Format(format!("spectrum line {}: expected 3 columns", i + 2)));
            }
            f.push(v[0]);
            s.push(v[1]);
            a.push(v[2]);
        }
        Self::new(f, s, a)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SpectrumFit {
    pub pump: f64,
    pub gain: f64,
    pub eta_t: f64,
    /// Covariance of `(pump, eta_t)` scaled by the residual variance.
    pub covariance: [[f64; 2]; 2],
    /// Root-mean-square residual in dB.
    pub rms_residual_db: f64,
    pub iterations: usize,
    /// Set when the data do not constrain both parameters (e.g. no squeezing
    /// is visible, so the pump is unidentifiable).
    pub degenerate: bool,
}

impl SpectrumFit {
    pub fn gain_std(&self) -> f64 {
        // dG/dx = 2 / (1 - x)^3
        2.0 / (1.0 - self.pump).powi(3) * self.covariance[0][0].max(0.0).sqrt()
    }

    pub fn eta_std(&self) -> f64 {
        self.covariance[1][1].max(0.0).sqrt()
    }
}

const PUMP_MAX: f64 = 0.999;

fn residuals(data: &SpectrumData, k: f64, p: &Vector2<f64>) -> Vec<f64> {
    let mut r = Vec::with_capacity(2 * data.len());
    for i in 0..data.len() {
        let (s, a) = spectrum_db(k, p[0], 2.0 * std::f64::consts::PI * data.freq_hz[i], p[1]);
        r.push(s - data.squeezed_db[i]);
        r.push(a - data.antisqueezed_db[i]);
    }
    r
}

fn cost(r: &[f64]) -> f64 {
    r.iter().map(|v| v * v).sum()
}

fn clamp(p: Vector2<f64>) -> Vector2<f64> {
    Vector2::new(p[0].clamp(0.0, PUMP_MAX), p[1].clamp(0.0, 1.0))
}

/// Central-difference Jacobian of the residual vector.
fn jacobian(data: &SpectrumData, k: f64, p: &Vector2<f64>) -> Vec<[f64; 2]> {
    let mut cols = Vec::new();
    for j in 0..2 {
        let h = 1e-7;
        let mut lo = *p;
        let mut hi = *p;
        lo[j] -= h;
        hi[j] += h;
        // one-sided at the bounds
        let (lo, hi) = (clamp(lo), clamp(hi));
        let d = hi[j] - lo[j];
        let rl = residuals(data, k, &lo);
        let rh = residuals(data, k, &hi);
        cols.push(rh.iter().zip(&rl).map(|(a, b)| (a - b) / d).collect::<Vec<_>>());
    }
    (0..cols[0].len()).map(|i| [cols[0][i], cols[1][i]]).collect()
}

fn normal_equations(jac: &[[f64; 2]], r: &[f64]) -> (Matrix2<f64>, Vector2<f64>) {
    let mut jtj = Matrix2::zeros();
    let mut jtr = Vector2::zeros();
    for (row, ri) in jac.iter().zip(r) {
        for a in 0..2 {
            jtr[a] += row[a] * ri;
            for b in 0..2 {
                jtj[(a, b)] += row[a] * row[b];
            }
        }
    }
    (jtj, jtr)
}

/// Levenberg–Marquardt fit of `(x, eta_t)` with the cavity half-width known.
pub fn fit_spectrum(data: &SpectrumData, cavity_hwhm_hz: f64) -> Result<SpectrumFit> {
    if !(cavity_hwhm_hz > 0.0) {
        return Err(Error::param("cavity_hwhm_hz", "must be > 0"));
    }
    let k = 2.0 * std::f64::consts::PI * cavity_hwhm_hz;
    let n = data.len();

    // coarse grid start
    let mut p = Vector2::new(0.3, 0.5);
    let mut best = f64::INFINITY;
    for i in 1..40 {
        for j in 1..20 {
            let q = Vector2::new(i as f64 * 0.024, j as f64 * 0.05);
            let c = cost(&residuals(data, k, &q));
            if c < best {
                best = c;
                p = q;
            }
        }
    }

    let mut lambda = 1e-3;
    let mut r = residuals(data, k, &p);
    let mut c = cost(&r);
    let mut iterations = 0;
    let mut converged = false;
    while iterations < 200 {
        iterations += 1;
        let jac = jacobian(data, k, &p);
        let (jtj, jtr) = normal_equations(&jac, &r);
        let mut improved = false;
        for _ in 0..30 {
            let damped = jtj + Matrix2::from_diagonal(&jtj.diagonal()) * lambda + Matrix2::identity() * 1e-15;
            let Some(step) = damped.lu().solve(&(-jtr)) else {
                lambda *= 10.0;
                continue;
            };
            let trial = clamp(p + step);
            let rt = residuals(data, k, &trial);
            let ct = cost(&rt);
            if ct <= c {
                let dp = (trial - p).norm();
                let dc = c - ct;
                p = trial;
                r = rt;
                c = ct;
                lambda = (lambda * 0.3).max(1e-12);
                improved = true;
                if dp < 1e-12 || dc <= 1e-15 * c.max(1e-300) {
                    converged = true;
                }
                break;
            }
            lambda *= 10.0;
        }
        if !improved || converged {
            converged = true;
            break;
        }
    }
    if !converged || !c.is_finite() {
        return Err(Error::FitFailed(format!(
            "no convergence after {iterations} iterations, rms residual {:.3e} dB",
            (c / (2 * n) as f64).sqrt()
        )));
    }

    let jac = jacobian(data, k, &p);
    let (jtj, _) = normal_equations(&jac, &r);
    let dof = (2 * n).saturating_sub(2).max(1) as f64;
    let s2 = c / dof;
    let eig = jtj.symmetric_eigen().eigenvalues;
    let (lo, hi) = (eig.min(), eig.max());
    let degenerate = p[1] < 1e-3 || lo <= 1e-10 * hi.max(1e-300);
    let cov = if degenerate {
        [[f64::INFINITY, f64::NAN], [f64::NAN, f64::INFINITY]]
    } else {
        let inv = jtj.try_inverse().expect("non-degenerate normal matrix");
        [[inv[(0, 0)] * s2, inv[(0, 1)] * s2], [inv[(1, 0)] * s2, inv[(1, 1)] * s2]]
    };
    Ok(SpectrumFit {
        pump: p[0],
        gain: pump_to_gain(p[0])?,
        eta_t: p[1],
        covariance: cov,
        rms_residual_db: (c / (2 * n) as f64).sqrt(),
        iterations,
        degenerate,
    })
}

/// Log-spaced analysis frequencies between `f_lo` and `f_hi`.
pub fn log_frequencies(f_lo: f64, f_hi: f64, n: usize) -> Vec<f64> {
    let (a, b) = (f_lo.ln(), f_hi.ln());
    (0..n).map(|i| (a + (b - a) * i as f64 / (n - 1).max(1) as f64).exp()).collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::gaussian_model::gain_to_pump;

    #[test]
    fn noiseless_exact_recovery() {
        let x = gain_to_pump(2.3).unwrap();
        let f = log_frequencies(1e5, 3e7, 60);
        let data = SpectrumData::model(&f, 4.4e6, x, 0.56);
        let fit = fit_spectrum(&data, 4.4e6).unwrap();
        assert!((fit.gain - 2.3).abs() < 1e-6);
        assert!((fit.eta_t - 0.56).abs() < 1e-6);
        assert!(!fit.degenerate);
    }

    #[test]
    fn no_signal_is_degenerate() {
        let f = log_frequencies(1e5, 3e7, 40);
        let data = SpectrumData::model(&f, 4.4e6, 0.3, 0.0);
        let fit = fit_spectrum(&data, 4.4e6).unwrap();
        assert!(fit.eta_t < 1e-3);
        assert!(fit.degenerate);
    }

    #[test]
    fn csv_round_trip() {
        let f = log_frequencies(1e5, 3e7, 5);
        let data = SpectrumData::model(&f, 4.4e6, 0.2, 0.5);
        let back = SpectrumData::from_csv(&data.to_csv()).unwrap();
        assert_eq!(back.len(), 5);
        for i in 0..5 {
            assert!((back.squeezed_db[i] - data.squeezed_db[i]).abs() < 1e-10);
        }
    }
}
