use rand::Rng;
use rand_distr::StandardNormal;

use super::noise::{quadrature_psd, spectral_synthesis};
use crate::error::{Error, Result};
use crate::gaussian_model::{CorrelationKernel, TemporalMode};

pub const SEGMENT_LEN: usize = 1000;
pub const SAMPLE_RATE_HZ: f64 = 500e6;
/// Time of sample 0 relative to the click, seconds.
pub const SEGMENT_START_S: f64 = -1e-6;

pub fn sample_time(k: usize) -> f64 {
    SEGMENT_START_S + k as f64 / SAMPLE_RATE_HZ
}

/// One 2 us homodyne record around a click. Sample `k` is at
/// `click + sample_time(k)`; samples are scaled so vacuum has variance 1/2.
#[derive(Debug, Clone, PartialEq)]
pub struct RawSegment {
    pub index: u64,
    pub click_time_ns: i64,
    pub flags: u32,
    pub samples: Vec<f64>,
}

impl RawSegment {
    pub fn validate(&self) -> Result<()> {
        if self.samples.len() != SEGMENT_LEN {
            return Err(Error::Dimension {
                expected: SEGMENT_LEN,
                got: self.samples.len(),
            });
        }
        if self.samples.iter().any(|v| !v.is_finite()) {
            return Err(Error::Format("non-finite sample in segment".into()));
        }
        Ok(())
    }
}

/// Mode sampled on the segment grid with unit Euclidean norm.
pub fn discrete_mode(mode: &TemporalMode) -> Vec<f64> {
    mode.discretize(SEGMENT_START_S, 1.0 / SAMPLE_RATE_HZ, SEGMENT_LEN)
}

/// Noise outside the measured mode.
#[derive(Debug, Clone)]
pub enum Complement {
    /// Independent samples of variance 1/2.
    Vacuum,
    /// Stationary quadrature noise with the given excess kernel and
    /// detection efficiency.
    Stationary { kernel: CorrelationKernel, eta: f64 },
}

/// `x u_d + (I - u_d u_d^T) n` with `n` drawn from `complement`.
pub fn synthesize_segment<R: Rng>(
    x_value: f64,
    u_d: &[f64],
    complement: &Complement,
    rng: &mut R,
) -> Vec<f64> {
    let n = u_d.len();
    let mut noise: Vec<f64> = match complement {
        Complement::Vacuum => (0..n)
            .map(|_| std::f64::consts::FRAC_1_SQRT_2 * rng.sample::<f64, _>(StandardNormal))
            .collect(),
        Complement::Stationary { kernel, eta } => {
            // circulant embedding on twice the length keeps wrap-around out
            let mut full = spectral_synthesis(quadrature_psd(kernel, *eta), 2 * n, 1.0 / SAMPLE_RATE_HZ, rng);
            full.truncate(n);
            full
        }
    };
    let overlap: f64 = noise.iter().zip(u_d).map(|(a, b)| a * b).sum();
    for (v, u) in noise.iter_mut().zip(u_d) {
        *v += (x_value - overlap) * u;
    }
    noise
}

/// `sum_k u_d[k] segment[k]`.
pub fn matched_filter(u_d: &[f64], samples: &[f64]) -> f64 {
    u_d.iter().zip(samples).map(|(a, b)| a * b).sum()
}
