//! Unbinned iterative maximum-likelihood (R rho R) reconstruction.

use nalgebra::DMatrix;
use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::povm::{pair_count, pair_index, QuadraturePovm};
use crate::datasynth::QuadratureDataset;
use crate::error::{Error, Result};
use crate::fock::DensityMatrix;

pub const MIN_RECORDS: usize = 1000;
/// Records with `Tr(Pi rho)` below this are skipped for the iteration.
pub const PROBABILITY_FLOOR: f64 = 1e-14;
const CHUNK: usize = 512;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct MaxLikOptions {
    pub max_iterations: usize,
    /// Stop when `|dL| / max(|L|, 1)` falls below this.
    pub rel_tol: f64,
    /// First dilution parameter tried after a rejected full step.
    pub dilution: f64,
}

impl Default for MaxLikOptions {
    fn default() -> Self {
        MaxLikOptions {
            max_iterations: 2000,
            rel_tol: 1e-10,
            dilution: 0.1,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Diagnostics {
    /// `1 - Tr rho` after clipping, before the final renormalisation.
    pub trace_deficit: f64,
    /// Most negative eigenvalue before clipping (0 if none).
    pub max_negative_eigenvalue: f64,
    /// Largest number of records excluded in any pass.
    pub excluded_records: usize,
    /// Number of diluted steps taken.
    pub diluted_steps: usize,
    /// Population of the highest retained Fock level.
    pub top_level_population: f64,
}

#[derive(Debug, Clone)]
pub struct ReconstructionResult {
    pub rho: DensityMatrix,
    /// Mean log-likelihood of each accepted iterate, starting with the initial state.
    pub likelihood_trace: Vec<f64>,
    pub iterations: usize,
    pub converged: bool,
    pub diagnostics: Diagnostics,
}

impl ReconstructionResult {
    pub fn trace_csv(&self) -> String {
        let mut s = String::from("iteration,log_likelihood\n");
        for (i, l) in self.likelihood_trace.iter().enumerate() {
            s.push_str(&format!("{i},{l:.15e}\n"));
        }
        s
    }
}

/// Per-record operator data: `h[pair(m,n)] = G_mn(x) e^{i(m-n) theta}` for `m <= n`.
struct Records {
    n_max: usize,
    pairs: usize,
    h: Vec<Complex64>,
    len: usize,
}

impl Records {
    fn new(dataset: &QuadratureDataset, povm: &QuadraturePovm) -> Self {
        let n_max = povm.n_max();
        let pairs = pair_count(n_max);
        let scale = dataset.vacuum_scale;
        let per: Vec<Vec<Complex64>> = dataset
            .xs
            .par_iter()
            .zip(dataset.thetas.par_iter())
            .map(|(&x, &theta)| {
                let g = povm.radial(x * scale);
                let phase: Vec<Complex64> = (0..=n_max)
                    .map(|k| Complex64::from_polar(1.0, -(k as f64) * theta))
                    .collect();
                let mut out = vec![Complex64::new(0.0, 0.0); pairs];
                for m in 0..=n_max {
                    for n in m..=n_max {
                        let i = pair_index(n_max, m, n);
                        out[i] = phase[n - m] * g[i];
                    }
                }
                out
            })
            .collect();
        Records {
            n_max,
            pairs,
            h: per.into_iter().flatten().collect(),
            len: dataset.len(),
        }
    }

    fn record(&self, j: usize) -> &[Complex64] {
        &self.h[j * self.pairs..(j + 1) * self.pairs]
    }

    /// Packed upper triangle of rho, conjugated and doubled off-diagonal so
    /// that `Tr(Pi rho) = Re sum_i h_i w_i`.
    fn weights(&self, rho: &DMatrix<Complex64>) -> Vec<Complex64> {
        let mut w = vec![Complex64::new(0.0, 0.0); self.pairs];
        for m in 0..=self.n_max {
            for n in m..=self.n_max {
                // Tr(Pi rho) = sum_mn Pi_mn rho_nm
                let f = if m == n { 1.0 } else { 2.0 };
                w[pair_index(self.n_max, m, n)] = rho[(n, m)] * f;
            }
        }
        w
    }

    fn probability(&self, j: usize, w: &[Complex64]) -> f64 {
        self.record(j)
            .iter()
            .zip(w)
            .map(|(h, w)| h.re * w.re - h.im * w.im)
            .sum()
    }
}

/// Result of one pass over the data at a fixed rho.
struct Pass {
    log_likelihood: f64,
    /// Packed upper triangle of `sum_j Pi_j / p_j`.
    r: Vec<Complex64>,
    used: usize,
    excluded: usize,
}

fn pass(records: &Records, rho: &DMatrix<Complex64>, want_r: bool) -> Pass {
    let w = records.weights(rho);
    let chunks = records.len.div_ceil(CHUNK);
    let partial: Vec<Pass> = (0..chunks)
        .into_par_iter()
        .map(|c| {
            let mut acc = Pass {
                log_likelihood: 0.0,
                r: if want_r { vec![Complex64::new(0.0, 0.0); records.pairs] } else { Vec::new() },
                used: 0,
                excluded: 0,
            };
            for j in c * CHUNK..((c + 1) * CHUNK).min(records.len) {
                let p = records.probability(j, &w);
                if p < PROBABILITY_FLOOR {
                    acc.excluded += 1;
                    continue;
                }
                acc.used += 1;
                acc.log_likelihood += p.ln();
                if want_r {
                    let inv = 1.0 / p;
                    for (r, h) in acc.r.iter_mut().zip(records.record(j)) {
                        *r += h * inv;
                    }
                }
            }
            acc
        })
        .collect();
    let mut total = tree_reduce(partial);
    if total.used > 0 {
        total.log_likelihood /= total.used as f64;
    } else {
        total.log_likelihood = f64::NEG_INFINITY;
    }
    total
}

/// Pairwise reduction in a fixed order, independent of the thread count.
fn tree_reduce(mut v: Vec<Pass>) -> Pass {
    while v.len() > 1 {
        let mut next = Vec::with_capacity(v.len().div_ceil(2));
        let mut it = v.into_iter();
        while let Some(mut a) = it.next() {
            if let Some(b) = it.next() {
                a.log_likelihood += b.log_likelihood;
                for (x, y) in a.r.iter_mut().zip(&b.r) {
                    *x += y;
                }
                a.used += b.used;
                a.excluded += b.excluded;
            }
            next.push(a);
        }
        v = next;
    }
    v.pop().expect("at least one chunk")
}

fn unpack(records: &Records, packed: &[Complex64], scale: f64) -> DMatrix<Complex64> {
    let d = records.n_max + 1;
    let mut r = DMatrix::zeros(d, d);
    for m in 0..d {
        for n in m..d {
            let v = packed[pair_index(records.n_max, m, n)] * scale;
            r[(m, n)] = v;
            r[(n, m)] = v.conj();
        }
    }
    r
}

fn normalize(mut rho: DMatrix<Complex64>) -> DMatrix<Complex64> {
    // hermitise against round-off drift
    rho = (&rho + rho.adjoint()) * Complex64::new(0.5, 0.0);
    let t = rho.trace().re;
    rho / Complex64::new(t, 0.0)
}

fn sandwich(a: &DMatrix<Complex64>, rho: &DMatrix<Complex64>) -> DMatrix<Complex64> {
    normalize(a * rho * a)
}

fn check_input(dataset: &QuadratureDataset) -> Result<()> {
    if dataset.len() < MIN_RECORDS {
        return Err(Error::InsufficientData {
            got: dataset.len(),
            need: MIN_RECORDS,
        });
    }
    if dataset.thetas.len() != dataset.xs.len() {
        return Err(Error::Dimension {
            expected: dataset.xs.len(),
            got: dataset.thetas.len(),
        });
    }
    Ok(())
}

/// Mean log-likelihood `(1/N) sum_j ln Tr(Pi_j rho)`; `-inf` if any
/// probability is non-positive.
pub fn likelihood(rho: &DensityMatrix, dataset: &QuadratureDataset, povm: &QuadraturePovm) -> Result<f64> {
    if rho.n_max() != povm.n_max() {
        return Err(Error::Dimension {
            expected: povm.n_max() + 1,
            got: rho.n_max() + 1,
        });
    }
    if dataset.is_empty() {
        return Err(Error::InsufficientData { got: 0, need: 1 });
    }
    let records = Records::new(dataset, povm);
    let w = records.weights(rho.matrix());
    let logs: Vec<f64> = (0..records.len)
        .into_par_iter()
        .map(|j| {
            let p = records.probability(j, &w);
            if p > 0.0 {
                p.ln()
            } else {
                f64::NEG_INFINITY
            }
        })
        .collect();
    // sort so the sum is independent of record order
    let mut logs = logs;
    logs.sort_by(|a, b| a.total_cmp(b));
    if logs.first().is_some_and(|l| l.is_infinite()) {
        return Ok(f64::NEG_INFINITY);
    }
    Ok(logs.iter().sum::<f64>() / logs.len() as f64)
}

/// Reconstruct rho from calibrated homodyne records, starting from the
/// maximally mixed state.
pub fn reconstruct(
    dataset: &QuadratureDataset,
    povm: &QuadraturePovm,
    options: &MaxLikOptions,
) -> Result<ReconstructionResult> {
    check_input(dataset)?;
    let d = povm.n_max() + 1;
    let records = Records::new(dataset, povm);
    let identity = DMatrix::<Complex64>::identity(d, d);

    let mut rho = identity.clone() / Complex64::new(d as f64, 0.0);
    let mut current = pass(&records, &rho, true);
    let mut trace = vec![current.log_likelihood];
    let mut excluded = current.excluded;
    let mut diluted_steps = 0;
    let mut converged = false;
    let mut iterations = 0;

    while iterations < options.max_iterations {
        iterations += 1;
        let r = unpack(&records, &current.r, 1.0 / current.used.max(1) as f64);
        let old = current.log_likelihood;

        let mut candidate = sandwich(&r, &rho);
        let mut next = pass(&records, &candidate, true);
        if next.log_likelihood < old {
            let mut eps = options.dilution;
            loop {
                diluted_steps += 1;
                let step = &identity + &r * Complex64::new(eps, 0.0);
                candidate = sandwich(&step, &rho);
                next = pass(&records, &candidate, true);
                if next.log_likelihood >= old || eps < 1e-12 {
                    break;
                }
                eps *= 0.5;
            }
        }
        if next.log_likelihood < old {
            // no ascent direction left at floating-point resolution
            converged = true;
            break;
        }
        excluded = excluded.max(next.excluded);
        rho = candidate;
        current = next;
        trace.push(current.log_likelihood);
        let rel = (current.log_likelihood - old).abs() / old.abs().max(1.0);
        if rel < options.rel_tol {
            converged = true;
            break;
        }
    }

    let (rho, neg, deficit) = clip(rho);
    let rho = DensityMatrix::new(rho)?;
    let top = rho.population(rho.n_max());
    Ok(ReconstructionResult {
        rho,
        likelihood_trace: trace,
        iterations,
        converged,
        diagnostics: Diagnostics {
            trace_deficit: deficit,
            max_negative_eigenvalue: neg,
            excluded_records: excluded,
            diluted_steps,
            top_level_population: top,
        },
    })
}

/// Zero negative eigenvalues and renormalise.
fn clip(rho: DMatrix<Complex64>) -> (DMatrix<Complex64>, f64, f64) {
    let rho = (&rho + rho.adjoint()) * Complex64::new(0.5, 0.0);
    let eig = rho.clone().symmetric_eigen();
    let neg = eig.eigenvalues.iter().cloned().fold(0.0f64, f64::min);
    if neg >= 0.0 {
        let t = rho.trace().re;
        return (rho / Complex64::new(t, 0.0), 0.0, 1.0 - t);
    }
    let vals = eig.eigenvalues.map(|v| Complex64::new(v.max(0.0), 0.0));
    let v = &eig.eigenvectors;
    let out = v * DMatrix::from_diagonal(&vals) * v.adjoint();
    let t = out.trace().re;
    let out = (&out + out.adjoint()) * Complex64::new(0.5 / t, 0.0);
    (out, neg, 1.0 - t)
}

/// Average `k` reconstructions element-wise.
pub fn average_reconstructions(results: &[ReconstructionResult]) -> Result<DensityMatrix> {
    let states: Vec<DensityMatrix> = results.iter().map(|r| r.rho.clone()).collect();
    DensityMatrix::average(&states)
}
