//! Synthetic heralded homodyne data.
//!
//! Every record `j` draws from its own ChaCha8 stream `(seed, j)`, so
//! parallel and serial generation agree bit for bit.

mod clicks;
mod io;
mod noise;
mod segment;

pub use clicks::{click_times, dark_fraction, Click};
pub use io::{read_csv, read_dataset, read_segments, write_csv, write_dataset, write_segments, SEGMENT_HEADER_BYTES};
pub use noise::{homodyne_noise_trace, spectral_synthesis, welch_psd};
pub use segment::{
    discrete_mode, matched_filter, sample_time, synthesize_segment, Complement, RawSegment, SAMPLE_RATE_HZ,
    SEGMENT_LEN, SEGMENT_START_S,
};

use std::f64::consts::TAU;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Exp, StandardNormal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::conditional::{AnsatzParams, ConditionalState};
use crate::error::{Error, Result};
use crate::fock::CONVENTION;

const PHASE_STREAM: u64 = u64::MAX;
const SEGMENT_STREAM_BASE: u64 = 1 << 48;

/// Independent RNG stream `id` under `seed`.
pub fn stream(seed: u64, id: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(id);
    rng
}

/// How LO phases are assigned to records.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum PhasePlan {
    Fixed {
        theta: f64,
    },
    /// `theta = scan_rate * t_click (mod 2 pi)` with Poisson click times and
    /// optional Gaussian phase jitter.
    LinearScan {
        scan_rate_rad_s: f64,
        click_rate_hz: f64,
        #[serde(default)]
        jitter_rad: f64,
    },
}

impl PhasePlan {
    /// Returns `(click times, phases)`; click times are empty for a fixed plan.
    fn draw(&self, n: usize, seed: u64) -> Result<(Vec<f64>, Vec<f64>)> {
        match *self {
            PhasePlan::Fixed { theta } => Ok((Vec::new(), vec![theta.rem_euclid(TAU); n])),
            PhasePlan::LinearScan {
                scan_rate_rad_s,
                click_rate_hz,
                jitter_rad,
            } => {
                if !(click_rate_hz > 0.0) {
                    return Err(Error::param("click_rate_hz", "must be > 0"));
                }
                let gap = Exp::new(click_rate_hz).map_err(|e| Error::param("click_rate_hz", e.to_string()))?;
                let mut rng = stream(seed, PHASE_STREAM);
                let mut t = 0.0;
                let mut times = Vec::with_capacity(n);
                let mut thetas = Vec::with_capacity(n);
                for _ in 0..n {
                    t += gap.sample(&mut rng);
                    let jitter = if jitter_rad > 0.0 {
                        jitter_rad * rng.sample::<f64, _>(StandardNormal)
                    } else {
                        0.0
                    };
                    times.push(t);
                    thetas.push((scan_rate_rad_s * t + jitter).rem_euclid(TAU));
                }
                Ok((times, thetas))
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DatasetMetadata {
    pub seed: u64,
    /// "heralded", "vacuum" or a free label.
    pub kind: String,
    pub eta_det: f64,
    pub phase_plan: PhasePlan,
    /// Unwrapped LO phase range covered by the records, radians.
    pub phase_span_rad: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub model_hash: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub mode: Option<AnsatzParams>,
    pub convention: String,
}

/// Phase/quadrature records. `xs` are stored as sampled; `vacuum_scale` is
/// the calibration factor to apply (1 when already calibrated).
#[derive(Debug, Clone, PartialEq)]
pub struct QuadratureDataset {
    pub thetas: Vec<f64>,
    pub xs: Vec<f64>,
    /// Click times in seconds from the start of the run; empty if unknown.
    pub times_s: Vec<f64>,
    pub vacuum_scale: f64,
    pub metadata: DatasetMetadata,
}

impl QuadratureDataset {
    pub fn from_records(thetas: Vec<f64>, xs: Vec<f64>, metadata: DatasetMetadata) -> Result<Self> {
        if thetas.len() != xs.len() {
            return Err(Error::Dimension {
                expected: thetas.len(),
                got: xs.len(),
            });
        }
        Ok(QuadratureDataset {
            thetas,
            xs,
            times_s: Vec::new(),
            vacuum_scale: 1.0,
            metadata,
        })
    }

    pub fn len(&self) -> usize {
        self.xs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.xs.is_empty()
    }

    /// Unbiased sample variance of the calibrated values.
    pub fn variance(&self) -> f64 {
        let n = self.len() as f64;
        let s = self.vacuum_scale;
        let mean = self.xs.iter().sum::<f64>() * s / n;
        self.xs.iter().map(|x| (x * s - mean).powi(2)).sum::<f64>() / (n - 1.0)
    }

    /// Copy with the calibration folded into the stored values.
    pub fn calibrated(&self) -> Self {
        let mut out = self.clone();
        out.xs.iter_mut().for_each(|x| *x *= self.vacuum_scale);
        out.vacuum_scale = 1.0;
        out
    }

    /// Copy with `scale` recorded as the calibration factor.
    pub fn with_vacuum_scale(mut self, scale: f64) -> Self {
        self.vacuum_scale = scale;
        self
    }
}

pub const MIN_CALIBRATION_RECORDS: usize = 1000;

/// `sqrt(0.5 / var)` from a vacuum (LO-only) run.
pub fn calibrate_vacuum(vacuum: &QuadratureDataset) -> Result<f64> {
    if vacuum.len() < MIN_CALIBRATION_RECORDS {
        return Err(Error::InsufficientCalibration {
            got: vacuum.len(),
            need: MIN_CALIBRATION_RECORDS,
        });
    }
    let raw = QuadratureDataset {
        vacuum_scale: 1.0,
        ..vacuum.clone()
    };
    let var = raw.variance();
    if !(var > 0.0) {
        return Err(Error::param("vacuum", "sample variance is zero"));
    }
    Ok((0.5 / var).sqrt())
}

/// Draws `n` records from the exact quadrature marginals of `state`, then
/// applies detector loss `x -> sqrt(eta) x + sqrt(1 - eta) v`, `v ~ N(0, 1/2)`.
pub fn sample_quadratures(
    state: &ConditionalState,
    n: usize,
    plan: &PhasePlan,
    eta_det: f64,
    seed: u64,
) -> Result<QuadratureDataset> {
    if !(eta_det > 0.0 && eta_det <= 1.0) {
        return Err(Error::param("eta_det", format!("{eta_det} must lie in (0, 1]")));
    }
    let (times, thetas) = plan.draw(n, seed)?;
    let xs = (0..n)
        .into_par_iter()
        .map(|j| {
            let theta = thetas[j];
            let m = state.marginal(theta)?;
            let mut rng = stream(seed, j as u64);
            // open interval keeps the quantile finite
            let u = (rng.random::<f64>() + 0.5 / (1u64 << 53) as f64).min(1.0 - 1e-16);
            let x = m.quantile(u);
            let v: f64 = std::f64::consts::FRAC_1_SQRT_2 * rng.sample::<f64, _>(StandardNormal);
            Ok(eta_det.sqrt() * x + (1.0 - eta_det).sqrt() * v)
        })
        .collect::<Result<Vec<f64>>>()?;
    let span = match plan {
        PhasePlan::Fixed { .. } => 0.0,
        PhasePlan::LinearScan { scan_rate_rad_s, .. } => match (times.first(), times.last()) {
            (Some(a), Some(b)) => scan_rate_rad_s.abs() * (b - a),
            _ => 0.0,
        },
    };
    Ok(QuadratureDataset {
        thetas,
        xs,
        times_s: times,
        vacuum_scale: 1.0,
        metadata: DatasetMetadata {
            seed,
            kind: "heralded".into(),
            eta_det,
            phase_plan: *plan,
            phase_span_rad: span,
            model_hash: None,
            mode: None,
            convention: CONVENTION.into(),
        },
    })
}

/// LO-only calibration run: vacuum quadratures multiplied by `gain`
/// (the unknown electronic scale to be calibrated away).
pub fn sample_vacuum(n: usize, plan: &PhasePlan, gain: f64, seed: u64) -> Result<QuadratureDataset> {
    let vac = ConditionalState::vacuum();
    let mut ds = sample_quadratures(&vac, n, plan, 1.0, seed)?;
    ds.xs.iter_mut().for_each(|x| *x *= gain);
    ds.metadata.kind = "vacuum".into();
    Ok(ds)
}

/// Raw segments whose matched-filter outputs reproduce `dataset.xs`.
/// Segment flags carry [`FLAG_VACUUM_COMPLEMENT`] when the orthogonal noise
/// is vacuum.
pub fn synthesize_segments(
    dataset: &QuadratureDataset,
    u_d: &[f64],
    complement: &Complement,
    seed: u64,
) -> Vec<RawSegment> {
    let flags = match complement {
        Complement::Vacuum => FLAG_VACUUM_COMPLEMENT,
        Complement::Stationary { .. } => 0,
    };
    (0..dataset.len())
        .into_par_iter()
        .map(|j| {
            let mut rng = stream(seed, SEGMENT_STREAM_BASE + j as u64);
            let samples = synthesize_segment(dataset.xs[j], u_d, complement, &mut rng);
            RawSegment {
                index: j as u64,
                click_time_ns: dataset.times_s.get(j).map_or(0, |t| (t * 1e9).round() as i64),
                flags,
                samples,
            }
        })
        .collect()
}

/// Segment flag bit: noise outside the mode is vacuum.
pub const FLAG_VACUUM_COMPLEMENT: u32 = 1;

/// Matched-filter outputs of raw segments.
pub fn extract_quadratures(segments: &[RawSegment], u_d: &[f64]) -> Vec<f64> {
    segments.iter().map(|s| matched_filter(u_d, &s.samples)).collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn scan() -> PhasePlan {
        PhasePlan::LinearScan {
            scan_rate_rad_s: std::f64::consts::PI,
            click_rate_hz: 1e4,
            jitter_rad: 0.0,
        }
    }

    #[test]
    fn vacuum_variance_and_calibration() {
        let ds = sample_vacuum(20_000, &scan(), 1.0, 3).unwrap();
        let se = 0.5 * (2.0 / 20_000f64).sqrt();
        assert!((ds.variance() - 0.5).abs() < 3.0 * se);
        let scale = calibrate_vacuum(&ds).unwrap();
        assert!((scale - 1.0).abs() < 3.0 * se);
        let doubled = sample_vacuum(20_000, &scan(), 2.0, 3).unwrap();
        assert!((calibrate_vacuum(&doubled).unwrap() - 0.5 * scale).abs() < 1e-12);
    }

    #[test]
    fn calibration_needs_enough_records() {
        let ds = sample_vacuum(999, &scan(), 1.0, 3).unwrap();
        assert!(matches!(
            calibrate_vacuum(&ds),
            Err(Error::InsufficientCalibration { got: 999, need: 1000 })
        ));
    }

    #[test]
    fn scan_covers_full_circle() {
        // 20,000 clicks at 9e3/s last about 2.2 s, more than one scan period
        let plan = PhasePlan::LinearScan {
            scan_rate_rad_s: std::f64::consts::PI,
            click_rate_hz: 9e3,
            jitter_rad: 0.0,
        };
        let ds = sample_vacuum(20_000, &plan, 1.0, 4).unwrap();
        assert!(ds.metadata.phase_span_rad >= TAU);
        assert!(ds.thetas.iter().all(|t| (0.0..TAU).contains(t)));
    }

    #[test]
    fn identical_seeds_are_bit_identical() {
        let a = sample_vacuum(2000, &scan(), 1.0, 9).unwrap();
        let b = sample_vacuum(2000, &scan(), 1.0, 9).unwrap();
        assert_eq!(a, b);
        let c = sample_vacuum(2000, &scan(), 1.0, 10).unwrap();
        assert_ne!(a.xs, c.xs);
    }
}
