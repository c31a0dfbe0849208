//! Truncated Fock-space density matrices and their Wigner functions.
//!
//! Phase-space variables follow `x = (a + a^dagger)/sqrt(2)`, so the vacuum
//! Wigner function is `exp(-x^2 - p^2)/pi` and `int W dx dp = 1`.

use std::f64::consts::PI;

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub const CONVENTION: &str = "x=(a+a^dag)/sqrt(2); vacuum variance 1/2; int W dx dp = 1";

/// Hermitian density matrix on the basis `|0>..|n_max>`.
#[derive(Debug, Clone, PartialEq)]
pub struct DensityMatrix {
    rho: DMatrix<Complex64>,
}

impl DensityMatrix {
    /// Checks shape and Hermiticity (to 1e-9); does not renormalize.
    pub fn new(rho: DMatrix<Complex64>) -> Result<Self> {
        if rho.nrows() != rho.ncols() || rho.nrows() == 0 {
            return Err(Error::Dimension {
                expected: rho.nrows(),
                got: rho.ncols(),
            });
        }
        let dev = (&rho - rho.adjoint()).iter().map(|z| z.norm()).fold(0.0, f64::max);
        if dev > 1e-9 {
            return Err(Error::param("rho", format!("not Hermitian (deviation {dev:e})")));
        }
        Ok(DensityMatrix {
            rho: (&rho + rho.adjoint()) * Complex64::new(0.5, 0.0),
        })
    }

    pub fn from_pure(coeffs: &[Complex64]) -> Self {
        let v = DVector::from_column_slice(coeffs);
        DensityMatrix {
            rho: &v * v.adjoint(),
        }
    }

    pub fn from_real_pure(coeffs: &[f64]) -> Self {
        let c: Vec<Complex64> = coeffs.iter().map(|&x| Complex64::new(x, 0.0)).collect();
        Self::from_pure(&c)
    }

    pub fn number_state(n: usize, n_max: usize) -> Self {
        let mut c = vec![0.0; n_max + 1];
        c[n] = 1.0;
        Self::from_real_pure(&c)
    }

    pub fn maximally_mixed(n_max: usize) -> Self {
        let d = n_max + 1;
        DensityMatrix {
            rho: DMatrix::identity(d, d) * Complex64::new(1.0 / d as f64, 0.0),
        }
    }

    pub fn n_max(&self) -> usize {
        self.rho.nrows() - 1
    }

    pub fn matrix(&self) -> &DMatrix<Complex64> {
        &self.rho
    }

    pub fn get(&self, m: usize, n: usize) -> Complex64 {
        self.rho[(m, n)]
    }

    pub fn trace(&self) -> f64 {
        self.rho.diagonal().iter().map(|z| z.re).sum()
    }

    pub fn population(&self, n: usize) -> f64 {
        if n <= self.n_max() {
            self.rho[(n, n)].re
        } else {
            0.0
        }
    }

    pub fn populations(&self) -> Vec<f64> {
        self.rho.diagonal().iter().map(|z| z.re).collect()
    }

    /// Population carried by even photon numbers.
    pub fn even_mass(&self) -> f64 {
        self.populations().iter().step_by(2).sum()
    }

    pub fn odd_mass(&self) -> f64 {
        self.populations().iter().skip(1).step_by(2).sum()
    }

    /// Copy scaled to unit trace.
    pub fn normalized(&self) -> Self {
        let t = self.trace();
        DensityMatrix {
            rho: &self.rho / Complex64::new(t, 0.0),
        }
    }

    /// Eigenvalues in ascending order.
    pub fn eigenvalues(&self) -> Vec<f64> {
        let mut ev: Vec<f64> = self.rho.clone().symmetric_eigen().eigenvalues.iter().copied().collect();
        ev.sort_by(|a, b| a.partial_cmp(b).unwrap());
        ev
    }

    /// `<psi|rho|psi>` for a state vector padded or truncated to this basis.
    pub fn overlap_pure(&self, psi: &[f64]) -> f64 {
        let d = self.rho.nrows();
        let mut s = Complex64::new(0.0, 0.0);
        for m in 0..d.min(psi.len()) {
            for n in 0..d.min(psi.len()) {
                s += psi[m] * self.rho[(m, n)] * psi[n];
            }
        }
        s.re
    }

    /// `(1/pi) sum_n (-1)^n rho_nn`.
    pub fn wigner_at_origin(&self) -> f64 {
        self.populations()
            .iter()
            .enumerate()
            .map(|(n, p)| if n % 2 == 0 { *p } else { -*p })
            .sum::<f64>()
            / PI
    }

    pub fn wigner(&self, x: f64, p: f64) -> f64 {
        let k = wigner_kernels(x, p, self.n_max());
        let d = self.rho.nrows();
        let mut w = 0.0;
        for m in 0..d {
            w += (self.rho[(m, m)] * k[(m, m)]).re;
            for n in 0..m {
                w += 2.0 * (self.rho[(m, n)] * k[(m, n)]).re;
            }
        }
        w
    }

    /// Mean of density matrices (all with the same `n_max`).
    pub fn average(states: &[DensityMatrix]) -> Result<Self> {
        let first = states
            .first()
            .ok_or(Error::InsufficientData { got: 0, need: 1 })?;
        let mut acc = DMatrix::zeros(first.rho.nrows(), first.rho.ncols());
        for s in states {
            if s.rho.shape() != acc.shape() {
                return Err(Error::Dimension {
                    expected: acc.nrows(),
                    got: s.rho.nrows(),
                });
            }
            acc += &s.rho;
        }
        Ok(DensityMatrix {
            rho: acc / Complex64::new(states.len() as f64, 0.0),
        })
    }

    /// `<x>` and `<p>` and the 2x2 symmetric covariance of `(x, p)`.
    pub fn quadrature_moments(&self) -> ([f64; 2], [[f64; 2]; 2]) {
        let d = self.rho.nrows();
        let mut a = DMatrix::<Complex64>::zeros(d, d);
        for n in 1..d {
            a[(n - 1, n)] = Complex64::new((n as f64).sqrt(), 0.0);
        }
        let ad = a.adjoint();
        let s = Complex64::new(std::f64::consts::FRAC_1_SQRT_2, 0.0);
        let x = (&a + &ad) * s;
        let p = (&a - &ad) * (s * Complex64::new(0.0, -1.0));
        let ev = |op: &DMatrix<Complex64>| (&self.rho * op).trace().re;
        let mx = ev(&x);
        let mp = ev(&p);
        // the truncated x^2 misses the top level's upward coupling; acceptable
        // when the top population is negligible
        let xx = ev(&(&x * &x)) - mx * mx;
        let pp = ev(&(&p * &p)) - mp * mp;
        let xp = 0.5 * ev(&(&x * &p + &p * &x)) - mx * mp;
        ([mx, mp], [[xx, xp], [xp, pp]])
    }

    pub fn to_json(&self) -> DensityMatrixJson {
        DensityMatrixJson {
            n_max: self.n_max(),
            convention: CONVENTION.to_string(),
            rho: (0..self.rho.nrows())
                .map(|m| (0..self.rho.ncols()).map(|n| [self.rho[(m, n)].re, self.rho[(m, n)].im]).collect())
                .collect(),
        }
    }

    pub fn from_json(j: &DensityMatrixJson) -> Result<Self> {
        let d = j.n_max + 1;
        if j.rho.len() != d || j.rho.iter().any(|row| row.len() != d) {
            return Err(Error::Format(format!("rho must be {d}x{d}")));
        }
        let m = DMatrix::from_fn(d, d, |r, c| Complex64::new(j.rho[r][c][0], j.rho[r][c][1]));
        Self::new(m)
    }
}

/// Serialized density matrix: rows of `[re, im]` pairs.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct DensityMatrixJson {
    pub n_max: usize,
    pub convention: String,
    pub rho: Vec<Vec<[f64; 2]>>,
}

/// Wigner functions `W_{|m><n|}(x, p)` for all `m, n <= n_max`.
pub fn wigner_kernels(x: f64, p: f64, n_max: usize) -> DMatrix<Complex64> {
    let d = n_max + 1;
    let mut k = DMatrix::zeros(d, d);
    let u = 2.0 * (x * x + p * p);
    let gauss = (-0.5 * u).exp() / PI;
    let two_conj = Complex64::new(x, -p) * std::f64::consts::SQRT_2;
    let mut lead = Complex64::new(gauss, 0.0);
    for diff in 0..d {
        if diff > 0 {
            lead *= two_conj / (diff as f64).sqrt();
        }
        let df = diff as f64;
        let mut l_prev = 0.0;
        let mut l = 1.0;
        let mut pref = lead;
        for n in 0..d - diff {
            if n > 0 {
                let nf = n as f64;
                let next = ((2.0 * nf - 1.0 + df - u) * l - (nf - 1.0 + df) * l_prev) / nf;
                l_prev = l;
                l = next;
                pref *= -(nf / (nf + df)).sqrt();
            }
            let v = pref * l;
            k[(n + diff, n)] = v;
            k[(n, n + diff)] = v.conj();
        }
    }
    k
}

/// Normalized oscillator eigenfunctions `psi_0..psi_n_max` at `x`.
pub fn hermite_functions(x: f64, n_max: usize) -> Vec<f64> {
    let mut out = Vec::with_capacity(n_max + 1);
    let mut prev = 0.0;
    let mut cur = PI.powf(-0.25) * (-0.5 * x * x).exp();
    out.push(cur);
    for n in 0..n_max {
        let nf = n as f64;
        let next = (2.0 / (nf + 1.0)).sqrt() * x * cur - (nf / (nf + 1.0)).sqrt() * prev;
        prev = cur;
        cur = next;
        out.push(cur);
    }
    out
}

/// Uniform square grid `[-half_width, half_width]^2`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GridSpec {
    pub half_width: f64,
    pub points: usize,
}

impl Default for GridSpec {
    fn default() -> Self {
        GridSpec {
            half_width: 4.0,
            points: 161,
        }
    }
}

impl GridSpec {
    pub fn axis(&self) -> Vec<f64> {
        if self.points < 2 {
            return vec![0.0];
        }
        let h = 2.0 * self.half_width / (self.points - 1) as f64;
        (0..self.points).map(|i| -self.half_width + i as f64 * h).collect()
    }
}

/// Sampled Wigner surface; `values[i][j] = W(axis[i], axis[j])` with `i` on x.
#[derive(Debug, Clone)]
pub struct WignerGrid {
    pub axis: Vec<f64>,
    pub values: Vec<Vec<f64>>,
    /// `1 - trace`, nonzero when the basis truncates the state.
    pub trace_deficit: f64,
}

impl WignerGrid {
    pub fn truncation_warning(&self) -> bool {
        self.trace_deficit.abs() > 1e-3
    }

    pub fn to_csv(&self) -> String {
        let mut s = format!("# {CONVENTION}\nx,p,w\n");
        for (i, x) in self.axis.iter().enumerate() {
            for (j, p) in self.axis.iter().enumerate() {
                s.push_str(&format!("{x},{p},{}\n", self.values[i][j]));
            }
        }
        s
    }
}

pub fn wigner_from_fock(rho: &DensityMatrix, grid: GridSpec) -> WignerGrid {
    use rayon::prelude::*;
    let axis = grid.axis();
    let values = axis
        .par_iter()
        .map(|&x| axis.iter().map(|&p| rho.wigner(x, p)).collect())
        .collect();
    WignerGrid {
        axis,
        values,
        trace_deficit: 1.0 - rho.trace(),
    }
}

pub fn wigner_at_origin(rho: &DensityMatrix) -> f64 {
    rho.wigner_at_origin()
}
