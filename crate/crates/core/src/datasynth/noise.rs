//! Stationary Gaussian noise by spectral synthesis, and Welch PSD estimates.

use std::f64::consts::PI;

use rand::Rng;
use rand_distr::StandardNormal;
use rustfft::num_complex::Complex;
use rustfft::FftPlanner;

use crate::error::{Error, Result};
use crate::gaussian_model::{output_kernels, CorrelationKernel, OpoModel};

/// Real stationary sequence of length `n` whose circulant covariance has
/// eigenvalues `psd(omega_k)` at the FFT angular frequencies
/// `omega_k = 2 pi k / (n dt)`. `psd` is per-sample power: white noise of
/// variance `v` has `psd = v`.
pub fn spectral_synthesis<R: Rng, F: Fn(f64) -> f64>(psd: F, n: usize, dt: f64, rng: &mut R) -> Vec<f64> {
    let mut buf: Vec<Complex<f64>> = (0..n)
        .map(|_| Complex::new(rng.sample::<f64, _>(StandardNormal), 0.0))
        .collect();
    let mut planner = FftPlanner::new();
    planner.plan_fft_forward(n).process(&mut buf);
    for (k, z) in buf.iter_mut().enumerate() {
        let kk = if k <= n / 2 { k as f64 } else { k as f64 - n as f64 };
        let omega = 2.0 * PI * kk / (n as f64 * dt);
        *z *= psd(omega).max(0.0).sqrt();
    }
    planner.plan_fft_inverse(n).process(&mut buf);
    buf.iter().map(|z| z.re / n as f64).collect()
}

/// Per-sample PSD of the detected quadrature at LO phase `theta`, vacuum 1/2.
pub(crate) fn quadrature_psd(kernel: &CorrelationKernel, eta: f64) -> impl Fn(f64) -> f64 + '_ {
    move |omega| 0.5 + eta * kernel.spectral_density(omega)
}

/// Homodyne photocurrent at phase `theta` (0 = antisqueezed `x`), scaled so
/// vacuum samples have variance 1/2.
pub fn homodyne_noise_trace<R: Rng>(
    model: &OpoModel,
    theta: f64,
    duration_s: f64,
    sample_rate_hz: f64,
    eta_t: f64,
    rng: &mut R,
) -> Result<Vec<f64>> {
    model.validate()?;
    if !(0.0..=1.0).contains(&eta_t) {
        return Err(Error::param("eta_t", format!("{eta_t} must lie in [0, 1]")));
    }
    if !(sample_rate_hz >= 20.0 * model.cavity_hwhm_hz) {
        return Err(Error::param("sample_rate_hz", "must be at least 20x the cavity HWHM"));
    }
    let n = (duration_s * sample_rate_hz).round() as usize;
    if n < 2 {
        return Err(Error::param("duration_s", "trace shorter than two samples"));
    }
    let (anti, squeezed) = output_kernels(model)?;
    let kernel = CorrelationKernel::rotated(&anti, &squeezed, theta);
    Ok(spectral_synthesis(quadrature_psd(&kernel, eta_t), n, 1.0 / sample_rate_hz, rng))
}

/// One-sided frequency axis (Hz) and Welch PSD with a Hann window and 50%
/// overlap, normalized per sample so white noise of variance `v` reads `v`.
pub fn welch_psd(trace: &[f64], sample_rate_hz: f64, segment_len: usize) -> Result<(Vec<f64>, Vec<f64>)> {
    if segment_len < 8 || trace.len() < segment_len {
        return Err(Error::InsufficientData {
            got: trace.len(),
            need: segment_len.max(8),
        });
    }
    let window: Vec<f64> = (0..segment_len)
        .map(|i| 0.5 - 0.5 * (2.0 * PI * i as f64 / segment_len as f64).cos())
        .collect();
    let wnorm: f64 = window.iter().map(|w| w * w).sum();
    let fft = FftPlanner::new().plan_fft_forward(segment_len);
    let half = segment_len / 2 + 1;
    let mut acc = vec![0.0; half];
    let step = segment_len / 2;
    let mut count = 0usize;
    let mut start = 0;
    let mut buf = vec![Complex::new(0.0, 0.0); segment_len];
    while start + segment_len <= trace.len() {
        let seg = &trace[start..start + segment_len];
        let mean = seg.iter().sum::<f64>() / segment_len as f64;
        for (b, (x, w)) in buf.iter_mut().zip(seg.iter().zip(&window)) {
            *b = Complex::new((x - mean) * w, 0.0);
        }
        fft.process(&mut buf);
        for (a, z) in acc.iter_mut().zip(&buf) {
            *a += z.norm_sqr() / wnorm;
        }
        count += 1;
        start += step;
    }
    let freqs = (0..half).map(|k| k as f64 * sample_rate_hz / segment_len as f64).collect();
    Ok((freqs, acc.into_iter().map(|a| a / count as f64).collect()))
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn white_noise_is_flat_at_vacuum() {
        let model = OpoModel {
            pump_parameter: 0.0,
            ..OpoModel::reference()
        };
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let tr = homodyne_noise_trace(&model, 0.0, 1e-3, 100e6, 1.0, &mut rng).unwrap();
        let (_, psd) = welch_psd(&tr, 100e6, 1024).unwrap();
        let mean = psd[1..psd.len() - 1].iter().sum::<f64>() / (psd.len() - 2) as f64;
        assert!((mean - 0.5).abs() < 0.01);
        // band averages of 32 bins stay within 5%
        for chunk in psd[1..psd.len() - 1].chunks(32) {
            let m = chunk.iter().sum::<f64>() / chunk.len() as f64;
            assert!((m / 0.5 - 1.0).abs() < 0.05, "{m}");
        }
    }

    #[test]
    fn rejects_slow_sampling() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        assert!(homodyne_noise_trace(&OpoModel::reference(), 0.0, 1e-5, 50e6, 0.5, &mut rng).is_err());
    }
}
