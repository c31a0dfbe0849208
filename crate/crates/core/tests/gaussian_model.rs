use photonsub::gaussian_model::{
    assemble_covariance, gain_to_pump, mode_overlap, mode_overlap_quadrature, output_kernels, photon_flux,
    squeezing_spectrum, CorrelationKernel, OpoModel, TemporalMode,
};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use rustfft::{num_complex::Complex, FftPlanner};
use std::f64::consts::PI;

/// Euler simulation of `dX = -lambda X dt + sqrt(2k) dB`, `X_out = sqrt(2k) X - dB/dt`
/// with `<dB^2> = dt/2`; returns the empirical output autocorrelation at
/// the requested lags (in steps). The input-input product `dB_n dB_{n-m}`
/// has zero mean for `m > 0` and is subtracted as a control variate.
fn simulate_ou(k: f64, lambda: f64, dt: f64, steps: usize, lags: &[usize], seed: u64) -> Vec<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let max_lag = *lags.iter().max().unwrap();
    let mut hist = vec![0.0; max_lag + 1];
    let mut hist_in = vec![0.0; max_lag + 1];
    let mut acc = vec![0.0; lags.len()];
    let mut x = 0.0;
    let decay = 1.0 - lambda * dt;
    let amp = (2.0 * k).sqrt();
    let db_sd = (dt / 2.0).sqrt();
    // burn in
    for _ in 0..(20.0 / (lambda * dt)) as usize {
        let db: f64 = db_sd * rng.sample::<f64, _>(StandardNormal);
        x = decay * x + amp * db;
    }
    let mut count = 0usize;
    for n in 0..steps {
        let db: f64 = db_sd * rng.sample::<f64, _>(StandardNormal);
        let y = amp * x - db / dt;
        x = decay * x + amp * db;
        let slot = n % (max_lag + 1);
        hist[slot] = y;
        hist_in[slot] = db / dt;
        if n >= max_lag {
            for (a, &m) in acc.iter_mut().zip(lags) {
                let j = (n - m) % (max_lag + 1);
                *a += y * hist[j] - hist_in[slot] * hist_in[j];
            }
            count += 1;
        }
    }
    acc.iter().map(|a| a / count as f64).collect()
}

#[test]
fn kernels_match_ornstein_uhlenbeck_simulation() {
    let model = OpoModel::reference();
    let (anti, squeezed) = output_kernels(&model).unwrap();
    let k = model.decay_rate();
    let eps = model.drive_rate();
    let dt = 0.005 / k;
    for (kernel, lambda, seed) in [(&anti, k - eps, 1), (&squeezed, k + eps, 2)] {
        let lags = [1usize, (0.5 / (lambda * dt)) as usize];
        let est = simulate_ou(k, lambda, dt, 20_000_000, &lags, seed);
        for (&m, e) in lags.iter().zip(est) {
            let exact = kernel.value(m as f64 * dt);
            let rel = (e - exact).abs() / exact.abs();
            assert!(rel < 0.03, "lag {m}: simulated {e:.4e}, closed form {exact:.4e}");
        }
    }
}

/// Numeric Fourier transform of the sampled kernel, Richardson-extrapolated
/// in the sampling step.
fn fft_spectrum(kernel: &CorrelationKernel, span: f64, step: f64) -> (Vec<f64>, Vec<f64>) {
    let n = (span / step).round() as usize;
    let mut buf: Vec<Complex<f64>> = (0..n)
        .map(|i| {
            let j = if i <= n / 2 { i as f64 } else { i as f64 - n as f64 };
            Complex::new(kernel.value(j * step) * step, 0.0)
        })
        .collect();
    FftPlanner::new().plan_fft_forward(n).process(&mut buf);
    let freqs = (0..n / 2).map(|i| i as f64 / span).collect();
    (freqs, buf[..n / 2].iter().map(|c| c.re).collect())
}

#[test]
fn closed_form_spectrum_matches_fft_of_kernels() {
    let model = OpoModel::reference();
    let (anti, squeezed) = output_kernels(&model).unwrap();
    let eta = 0.56;
    let span = 1e-4;
    let h = 2e-10;
    let (freqs, a1) = fft_spectrum(&anti, span, h);
    let (_, a2) = fft_spectrum(&anti, span, 2.0 * h);
    let (_, s1) = fft_spectrum(&squeezed, span, h);
    let (_, s2) = fft_spectrum(&squeezed, span, 2.0 * h);
    let mut checked = 0;
    for i in 1..freqs.len().min(a2.len()) {
        let f = freqs[i];
        if !(1e4..=5e7).contains(&f) || i % 37 != 1 {
            continue;
        }
        let ca = (4.0 * a1[i] - a2[i]) / 3.0;
        let cs = (4.0 * s1[i] - s2[i]) / 3.0;
        let (sq_db, anti_db) = squeezing_spectrum(&model, 2.0 * PI * f, eta).unwrap();
        // S / S_vac = (1/2 + eta C(omega)) / (1/2)
        let fft_anti = 1.0 + 2.0 * eta * ca;
        let fft_sq = 1.0 + 2.0 * eta * cs;
        let lin_anti = 10f64.powf(anti_db / 10.0);
        let lin_sq = 10f64.powf(sq_db / 10.0);
        assert!(((fft_anti - lin_anti) / lin_anti).abs() < 1e-6, "{f} Hz: {fft_anti} vs {lin_anti}");
        assert!(((fft_sq - lin_sq) / lin_sq).abs() < 1e-6, "{f} Hz: {fft_sq} vs {lin_sq}");
        checked += 1;
    }
    assert!(checked > 50);
}

fn random_model(rng: &mut ChaCha8Rng) -> OpoModel {
    OpoModel {
        cavity_hwhm_hz: rng.random_range(1e6..2e7),
        eta_opo: rng.random_range(0.3..1.0),
        eta_pr: rng.random_range(0.3..1.0),
        eta_hom: rng.random_range(0.5..1.0),
        eta_det: rng.random_range(0.3..1.0),
        bs_reflectivity: rng.random_range(0.001..0.5),
        trigger_filter_hwhm_hz: rng.random_range(5e6..2e8),
        ..OpoModel::reference()
    }
    .with_gain(rng.random_range(1.0..8.0))
    .unwrap()
}

#[test]
fn closed_form_overlap_matches_quadrature() {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    for _ in 0..100 {
        let model = random_model(&mut rng);
        let (anti, squeezed) = output_kernels(&model).unwrap();
        let f = TemporalMode::trigger(rng.random_range(5e6..2e8), rng.random_range(-5e-8..5e-8)).unwrap();
        let g = loop {
            let a: f64 = rng.random_range(2e6..6e7);
            let b = rng.random_range(2e6..3e8);
            if (a - b).abs() > 1e5 {
                break TemporalMode::ansatz(a, b, rng.random_range(-5e-8..5e-8)).unwrap();
            }
        };
        let kernel = if rng.random::<bool>() { &anti } else { &squeezed };
        let (x, y) = if rng.random::<bool>() { (&f, &g) } else { (&g, &g) };
        let closed = mode_overlap(kernel, x, y).unwrap();
        let quad = mode_overlap_quadrature(kernel, x, y).unwrap();
        let scale = kernel.terms()[0].coefficient.abs() / kernel.terms()[0].rate;
        assert!((closed - quad).abs() < 1e-8 * scale.max(1.0), "{closed} vs {quad}");
    }
}

#[test]
fn random_models_give_physical_covariances() {
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    for _ in 0..100 {
        let model = random_model(&mut rng);
        let f = TemporalMode::trigger(model.trigger_filter_hwhm_hz, 0.0).unwrap();
        let u = TemporalMode::ansatz(rng.random_range(2e6..3e7), rng.random_range(3e7..2e8), 0.0).unwrap();
        let cov = assemble_covariance(&model, &f, &u).unwrap();
        assert!(cov.min_symplectic_eigenvalue() >= 0.5 - 1e-9);
        assert!(cov.is_physical());
    }
}

#[test]
fn flux_grows_with_gain_and_matches_kernels() {
    let mut last = -1.0;
    for g in [1.0, 1.2, 1.8, 2.3, 4.0, 10.0] {
        let m = OpoModel::reference().with_gain(g).unwrap();
        let flux = photon_flux(&m);
        assert!(flux > last);
        last = flux;
        let (a, s) = output_kernels(&m).unwrap();
        assert!((flux - 0.5 * (a.value(0.0) + s.value(0.0))).abs() <= 1e-12 * flux.max(1.0));
    }
    assert!((gain_to_pump(1.8).unwrap() - 0.2546).abs() < 1e-4);
}
