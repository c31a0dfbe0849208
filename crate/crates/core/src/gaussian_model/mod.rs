//! Stationary Gaussian description of a cw OPO below threshold.
//!
//! The degenerate OPO decouples into two quadrature Ornstein–Uhlenbeck
//! processes. The amplified quadrature `X` relaxes at `k - eps`, the
//! squeezed quadrature `P` at `k + eps`, where `k = 2*pi*hwhm` is the field
//! amplitude decay rate and `eps = x * k` the parametric drive. All internal
//! rates are in rad/s; user-facing bandwidths are in Hz.
//!
//! Quadratures use `x = (a + a^dagger)/sqrt(2)`, so vacuum variance is 1/2.

mod covariance;
mod expo;
mod kernel;
mod mode;

pub use covariance::{assemble_covariance, mode_overlap, mode_overlap_quadrature, TwoModeCovariance};
pub use kernel::{CorrelationKernel, KernelTerm};
pub use mode::{ModeShape, TemporalMode};

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Physical parameters of the photon-subtraction source.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct OpoModel {
    /// Ratio of parametric drive to amplitude decay rate, `0 <= x < 1`.
    pub pump_parameter: f64,
    /// Cavity half width at half maximum, Hz.
    pub cavity_hwhm_hz: f64,
    /// OPO escape efficiency.
    pub eta_opo: f64,
    /// Propagation efficiency from the OPO to the homodyne detector.
    pub eta_pr: f64,
    /// Homodyne mode-matching efficiency (enters squared).
    pub eta_hom: f64,
    /// Effective homodyne detector efficiency.
    pub eta_det: f64,
    /// Power reflectivity `|rho|^2` of the tapping beam splitter.
    pub bs_reflectivity: f64,
    /// Half width of the lumped Lorentzian trigger filter, Hz.
    pub trigger_filter_hwhm_hz: f64,
    /// Probability that a herald is a dark count.
    pub dark_fraction: f64,
    /// Filter transmission times APD quantum efficiency. Only rescales the
    /// click rate; the conditional state does not depend on it.
    pub trigger_path_efficiency: f64,
    /// APD dark count rate, 1/s.
    pub dark_count_rate_hz: f64,
}

impl Default for OpoModel {
    fn default() -> Self {
        Self::reference()
    }
}

impl OpoModel {
    /// The experimental configuration at gain 2.3 with measured loss budget.
    pub fn reference() -> Self {
        OpoModel {
            pump_parameter: gain_to_pump(2.3).expect("gain 2.3 is valid"),
            cavity_hwhm_hz: 4.4e6,
            eta_opo: 0.86,
            eta_pr: 0.88,
            eta_hom: 0.96,
            eta_det: 0.85,
            bs_reflectivity: 0.05,
            trigger_filter_hwhm_hz: 48e6,
            dark_fraction: 0.03,
            trigger_path_efficiency: 0.05,
            dark_count_rate_hz: 160.0,
        }
    }

    /// Same source with the given OPO power gain.
    pub fn with_gain(mut self, gain: f64) -> Result<Self> {
        self.pump_parameter = gain_to_pump(gain)?;
        self.validate()?;
        Ok(self)
    }

    /// Collapse every signal-arm loss into one overall efficiency `eta`,
    /// including the beam-splitter transmission. The detector is treated as
    /// ideal, matching a detector-corrected reconstruction.
    pub fn with_total_signal_efficiency(mut self, eta: f64) -> Result<Self> {
        let tau2 = self.transmissivity();
        if eta > tau2 {
            return Err(Error::param(
                "eta",
                format!("overall efficiency {eta} exceeds beam-splitter transmission {tau2}"),
            ));
        }
        self.eta_opo = 1.0;
        self.eta_hom = 1.0;
        self.eta_det = 1.0;
        self.eta_pr = eta / tau2;
        self.validate()?;
        Ok(self)
    }

    /// Copy with a perfect homodyne detector (loss applied later when sampling).
    pub fn without_detector(mut self) -> Self {
        self.eta_det = 1.0;
        self
    }

    pub fn validate(&self) -> Result<()> {
        let x = self.pump_parameter;
        if !x.is_finite() || x < 0.0 {
            return Err(Error::param("pump_parameter", format!("{x} must be >= 0")));
        }
        if x >= 1.0 {
            return Err(Error::AboveThreshold(x));
        }
        for (name, v) in [
            ("cavity_hwhm_hz", self.cavity_hwhm_hz),
            ("trigger_filter_hwhm_hz", self.trigger_filter_hwhm_hz),
        ] {
            if !(v.is_finite() && v > 0.0) {
                return Err(Error::param(name, format!("bandwidth {v} must be > 0")));
            }
        }
        for (name, v) in [
            ("eta_opo", self.eta_opo),
            ("eta_pr", self.eta_pr),
            ("eta_hom", self.eta_hom),
            ("eta_det", self.eta_det),
            ("bs_reflectivity", self.bs_reflectivity),
            ("dark_fraction", self.dark_fraction),
            ("trigger_path_efficiency", self.trigger_path_efficiency),
        ] {
            if !(0.0..=1.0).contains(&v) {
                return Err(Error::param(name, format!("{v} must lie in [0, 1]")));
            }
        }
        if !(self.dark_count_rate_hz.is_finite() && self.dark_count_rate_hz >= 0.0) {
            return Err(Error::param("dark_count_rate_hz", "must be >= 0"));
        }
        Ok(())
    }

    pub fn gain(&self) -> f64 {
        pump_to_gain(self.pump_parameter).expect("validated model")
    }

    /// Field amplitude decay rate `k`, rad/s.
    pub fn decay_rate(&self) -> f64 {
        2.0 * PI * self.cavity_hwhm_hz
    }

    /// Parametric drive `eps = x k`, rad/s.
    pub fn drive_rate(&self) -> f64 {
        self.pump_parameter * self.decay_rate()
    }

    /// `|tau|^2 = 1 - |rho|^2`.
    pub fn transmissivity(&self) -> f64 {
        1.0 - self.bs_reflectivity
    }

    /// `eta_OPO * eta_pr * eta_hom^2`.
    pub fn propagation_efficiency(&self) -> f64 {
        self.eta_opo * self.eta_pr * self.eta_hom * self.eta_hom
    }

    /// Signal-arm efficiency excluding the beam splitter, detector included.
    pub fn signal_efficiency(&self) -> f64 {
        self.propagation_efficiency() * self.eta_det
    }

    /// Overall efficiency from intracavity field to homodyne data.
    pub fn total_signal_efficiency(&self) -> f64 {
        self.transmissivity() * self.signal_efficiency()
    }

    /// Trigger-arm efficiency excluding the beam splitter.
    pub fn trigger_efficiency(&self) -> f64 {
        self.eta_opo * self.trigger_path_efficiency
    }

    /// Expected rate of field-induced APD clicks, 1/s.
    pub fn signal_click_rate(&self) -> f64 {
        self.bs_reflectivity * self.trigger_efficiency() * photon_flux(self)
    }

    /// Fraction of heralds that are dark counts at the modelled click rate.
    pub fn expected_dark_fraction(&self) -> f64 {
        let signal = self.signal_click_rate();
        let total = signal + self.dark_count_rate_hz;
        if total > 0.0 {
            self.dark_count_rate_hz / total
        } else {
            0.0
        }
    }
}

/// Degenerate OPA power gain `G = 1/(1-x)^2` inverted: `x = 1 - 1/sqrt(G)`.
pub fn gain_to_pump(gain: f64) -> Result<f64> {
    if !gain.is_finite() || gain < 1.0 {
        return Err(Error::GainDomain(gain));
    }
    Ok(1.0 - 1.0 / gain.sqrt())
}

pub fn pump_to_gain(pump_parameter: f64) -> Result<f64> {
    if !(0.0..1.0).contains(&pump_parameter) {
        return Err(Error::AboveThreshold(pump_parameter));
    }
    let s = 1.0 - pump_parameter;
    Ok(1.0 / (s * s))
}

/// Excess two-time correlation kernels of the output quadratures.
///
/// Returns `(C_X, C_P)` with `C_X(tau) = k eps/(k-eps) exp(-(k-eps)|tau|)` and
/// `C_P(tau) = -k eps/(k+eps) exp(-(k+eps)|tau|)`. The vacuum floor
/// `delta(tau)/2` is implicit.
pub fn output_kernels(model: &OpoModel) -> Result<(CorrelationKernel, CorrelationKernel)> {
    if model.pump_parameter >= 1.0 {
        return Err(Error::AboveThreshold(model.pump_parameter));
    }
    model.validate()?;
    let k = model.decay_rate();
    let eps = model.drive_rate();
    if eps == 0.0 {
        return Ok((CorrelationKernel::zero(), CorrelationKernel::zero()));
    }
    let anti = CorrelationKernel::new(vec![KernelTerm {
        coefficient: k * eps / (k - eps),
        rate: k - eps,
    }])?;
    let squeezed = CorrelationKernel::new(vec![KernelTerm {
        coefficient: -k * eps / (k + eps),
        rate: k + eps,
    }])?;
    Ok((anti, squeezed))
}

/// Detected squeezing and antisqueezing at angular frequency `omega`, in dB
/// relative to shot noise.
pub fn squeezing_spectrum(model: &OpoModel, omega: f64, total_efficiency: f64) -> Result<(f64, f64)> {
    if !(0.0..=1.0).contains(&total_efficiency) {
        return Err(Error::param("eta_t", format!("{total_efficiency} must lie in [0, 1]")));
    }
    model.validate()?;
    Ok(spectrum_db(
        model.decay_rate(),
        model.pump_parameter,
        omega,
        total_efficiency,
    ))
}

/// Closed-form spectra for decay rate `k`, pump `x`; no validation.
pub(crate) fn spectrum_db(k: f64, x: f64, omega: f64, eta_t: f64) -> (f64, f64) {
    let eps = x * k;
    let w2 = omega * omega;
    let sq = 1.0 - eta_t * 4.0 * k * eps / ((k + eps).powi(2) + w2);
    let anti = 1.0 + eta_t * 4.0 * k * eps / ((k - eps).powi(2) + w2);
    (10.0 * sq.log10(), 10.0 * anti.log10())
}

/// Photon flux in the OPO output, photons/s: `k eps^2 / (k^2 - eps^2)`.
pub fn photon_flux(model: &OpoModel) -> f64 {
    let k = model.decay_rate();
    let eps = model.drive_rate();
    k * eps * eps / (k * k - eps * eps)
}
