mod common;

use common::ks_test;
use nalgebra::Matrix2;
use photonsub::conditional::{model_state, AnsatzParams, ConditionalState};
use photonsub::datasynth::{
    calibrate_vacuum, discrete_mode, extract_quadratures, homodyne_noise_trace, matched_filter, read_dataset,
    read_segments, sample_quadratures, sample_vacuum, synthesize_segment, synthesize_segments, welch_psd,
    write_dataset, write_segments, Complement, PhasePlan, FLAG_VACUUM_COMPLEMENT,
};
use photonsub::gaussian_model::{output_kernels, squeezing_spectrum, OpoModel, TemporalMode};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use statrs::distribution::{ChiSquared, ContinuousCDF};
use statrs::function::erf::erfc;
use std::f64::consts::{PI, TAU};

const N: usize = 20_000;

fn scan() -> PhasePlan {
    PhasePlan::LinearScan {
        scan_rate_rad_s: PI,
        click_rate_hz: 1e3,
        jitter_rad: 0.0,
    }
}

fn normal_cdf(x: f64, var: f64) -> f64 {
    0.5 * erfc(-x / (2.0 * var).sqrt())
}

#[test]
fn vacuum_samples_pass_ks() {
    let ds = sample_quadratures(&ConditionalState::vacuum(), N, &scan(), 1.0, 21).unwrap();
    let (_, p) = ks_test(&ds.xs, |x| normal_cdf(x, 0.5));
    assert!(p > 0.01, "p = {p}");
}

#[test]
fn single_photon_samples_pass_ks() {
    let ds = sample_quadratures(&ConditionalState::single_photon(), N, &scan(), 1.0, 22).unwrap();
    // CDF of 2 x^2 exp(-x^2) / sqrt(pi)
    let cdf = |x: f64| normal_cdf(x, 0.5) - x * (-x * x).exp() / PI.sqrt();
    let (_, p) = ks_test(&ds.xs, cdf);
    assert!(p > 0.01, "p = {p}");
}

#[test]
fn squeezed_gaussian_samples_pass_ks_per_phase() {
    let sigma = Matrix2::new(1.4, 0.3, 0.3, 0.25);
    let st = ConditionalState::gaussian(sigma).unwrap();
    for (k, theta) in [0.0, 0.9, 2.2].into_iter().enumerate() {
        let ds = sample_quadratures(&st, N, &PhasePlan::Fixed { theta }, 1.0, 30 + k as u64).unwrap();
        let (s, c) = theta.sin_cos();
        let var = c * c * sigma[(0, 0)] + 2.0 * c * s * sigma[(0, 1)] + s * s * sigma[(1, 1)];
        let (_, p) = ks_test(&ds.xs, |x| normal_cdf(x, var));
        assert!(p > 0.01, "theta {theta}: p = {p}");
    }
}

#[test]
fn detector_loss_mixes_in_vacuum() {
    let eta = 0.6;
    let ds = sample_quadratures(&ConditionalState::single_photon(), N, &scan(), eta, 23).unwrap();
    let cdf = |x: f64| normal_cdf(x, 0.5) - eta * x * (-x * x).exp() / PI.sqrt();
    let (_, p) = ks_test(&ds.xs, cdf);
    assert!(p > 0.01, "p = {p}");
}

#[test]
fn scanned_phases_are_uniform() {
    let ds = sample_quadratures(&ConditionalState::vacuum(), N, &scan(), 1.0, 24).unwrap();
    let bins = 40;
    let mut counts = vec![0usize; bins];
    for t in &ds.thetas {
        counts[((t / TAU) * bins as f64) as usize % bins] += 1;
    }
    let expected = N as f64 / bins as f64;
    let chi2: f64 = counts.iter().map(|&c| (c as f64 - expected).powi(2) / expected).sum();
    let p = 1.0 - ChiSquared::new((bins - 1) as f64).unwrap().cdf(chi2);
    assert!(p > 0.01, "chi2 = {chi2}, p = {p}");
    assert!(ds.metadata.phase_span_rad >= TAU);
}

#[test]
fn calibration_restores_vacuum_variance() {
    let vac = sample_vacuum(N, &scan(), 2.0, 25).unwrap();
    let scale = calibrate_vacuum(&vac).unwrap();
    assert!((scale - 0.5).abs() < 0.5 * 3.0 * (2.0 / N as f64).sqrt());
    let calibrated = sample_vacuum(N, &scan(), 2.0, 26).unwrap().with_vacuum_scale(scale);
    let se = 0.5 * (2.0 / N as f64).sqrt();
    // two independent runs: combine the standard errors
    assert!((calibrated.variance() - 0.5).abs() < 3.0 * se * 2f64.sqrt());
}

#[test]
fn pipeline_state_lacks_points_near_zero() {
    let st = model_state(
        &OpoModel::reference().with_total_signal_efficiency(0.64).unwrap(),
        &AnsatzParams::default(),
        12,
    )
    .unwrap();
    let frac = |xs: &[f64]| xs.iter().filter(|x| x.abs() < 0.25).count() as f64 / xs.len() as f64;
    let heralded = sample_quadratures(&st, N, &scan(), 1.0, 27).unwrap();
    let vacuum = sample_quadratures(&ConditionalState::vacuum(), N, &scan(), 1.0, 28).unwrap();
    assert!(frac(&heralded.xs) < 0.7 * frac(&vacuum.xs));
}

#[test]
fn identical_seeds_reproduce_bit_exactly() {
    let st = ConditionalState::single_photon();
    let a = sample_quadratures(&st, 5000, &scan(), 0.8, 77).unwrap();
    let b = sample_quadratures(&st, 5000, &scan(), 0.8, 77).unwrap();
    assert_eq!(a, b);
    let c = sample_quadratures(&st, 5000, &scan(), 0.8, 78).unwrap();
    assert_ne!(a.xs, c.xs);
}

#[test]
fn segments_round_trip_through_matched_filter() {
    let mode = TemporalMode::ansatz(9e6, 48e6, 0.0).unwrap();
    let u = discrete_mode(&mode);
    let ds = sample_quadratures(&ConditionalState::single_photon(), 300, &scan(), 1.0, 40).unwrap();
    let (anti, squeezed) = output_kernels(&OpoModel::reference()).unwrap();
    let kernel = photonsub::gaussian_model::CorrelationKernel::rotated(&anti, &squeezed, 0.4);
    for complement in [Complement::Vacuum, Complement::Stationary { kernel, eta: 0.56 }] {
        let segs = synthesize_segments(&ds, &u, &complement, 41);
        let back = extract_quadratures(&segs, &u);
        for (x, y) in ds.xs.iter().zip(&back) {
            assert!((x - y).abs() < 1e-10);
        }
    }
}

#[test]
fn segment_files_round_trip() {
    let mode = TemporalMode::ansatz(9e6, 48e6, 0.0).unwrap();
    let u = discrete_mode(&mode);
    let ds = sample_quadratures(&ConditionalState::vacuum(), 20, &scan(), 1.0, 42).unwrap();
    let segs = synthesize_segments(&ds, &u, &Complement::Vacuum, 43);
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("segments.bin");
    write_segments(&path, &segs).unwrap();
    assert_eq!(std::fs::metadata(&path).unwrap().len(), 20 * 4024);
    let back = read_segments(&path).unwrap();
    for (a, b) in segs.iter().zip(&back) {
        assert_eq!(a.index, b.index);
        assert_eq!(a.click_time_ns, b.click_time_ns);
        assert_eq!(b.flags, FLAG_VACUUM_COMPLEMENT);
        // samples are stored as f32
        let x = matched_filter(&u, &b.samples);
        assert!((x - matched_filter(&u, &a.samples)).abs() < 1e-5);
    }
    let csv = dir.path().join("d.csv");
    write_dataset(&csv, &ds).unwrap();
    let again = read_dataset(&csv).unwrap();
    assert_eq!(again.metadata, ds.metadata);
}

#[test]
fn orthogonal_mode_sees_vacuum() {
    let u = discrete_mode(&TemporalMode::ansatz(9e6, 48e6, 0.0).unwrap());
    // a later mode, Gram–Schmidt orthogonalised against u
    let mut v = discrete_mode(&TemporalMode::ansatz(9e6, 48e6, 2e-7).unwrap());
    let ov: f64 = u.iter().zip(&v).map(|(a, b)| a * b).sum();
    v.iter_mut().zip(&u).for_each(|(b, a)| *b -= ov * a);
    let norm = v.iter().map(|b| b * b).sum::<f64>().sqrt();
    v.iter_mut().for_each(|b| *b /= norm);
    let mut rng = ChaCha8Rng::seed_from_u64(44);
    let n = 20_000;
    let vals: Vec<f64> = (0..n)
        .map(|_| matched_filter(&v, &synthesize_segment(1.3, &u, &Complement::Vacuum, &mut rng)))
        .collect();
    let var = vals.iter().map(|x| x * x).sum::<f64>() / n as f64;
    assert!((var - 0.5).abs() < 0.01, "variance {var}");
}

#[test]
fn welch_psd_tracks_closed_form_spectrum() {
    let model = OpoModel::reference();
    let eta = 0.56;
    let fs = 2e8;
    let seg = 16384;
    for (theta, seed) in [(PI / 2.0, 50), (0.0, 51)] {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let trace = homodyne_noise_trace(&model, theta, 0.05, fs, eta, &mut rng).unwrap();
        let (freqs, psd) = welch_psd(&trace, fs, seg).unwrap();
        let edges: Vec<f64> = (0..=16).map(|i| 1e5 * (200f64).powf(i as f64 / 16.0)).collect();
        for w in edges.windows(2) {
            let (mut meas, mut model_lin, mut count) = (0.0, 0.0, 0);
            for (f, p) in freqs.iter().zip(&psd) {
                if *f >= w[0] && *f < w[1] {
                    meas += p / 0.5;
                    let (sq, anti) = squeezing_spectrum(&model, TAU * f, eta).unwrap();
                    model_lin += 10f64.powf(if theta == 0.0 { anti } else { sq } / 10.0);
                    count += 1;
                }
            }
            assert!(count > 0);
            let diff_db = 10.0 * (meas / model_lin).log10();
            assert!(diff_db.abs() < 0.3, "band {:.3e}-{:.3e} Hz: {diff_db:.3} dB", w[0], w[1]);
            if theta == 0.0 {
                assert!(meas / count as f64 >= 1.0);
            }
        }
    }
}
