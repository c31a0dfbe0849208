//! Quadrature measurement operators with detector inefficiency.
//!
//! `<m| Pi(x, theta; eta) |n> = exp(i (m - n) theta) G_mn(x; eta)` where
//! `G_mn(x; 1) = psi_m(x) psi_n(x)` and for `eta < 1`
//! `G_mn(x; eta) = int psi_m(y) psi_n(y) K(x - sqrt(eta) y) dy` with the
//! vacuum-noise kernel `K(u) = exp(-u^2 / (1 - eta)) / sqrt(pi (1 - eta))`.

use crate::error::{Error, Result};
use crate::fock::hermite_functions;

/// Grid for the radial tables.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PovmGrid {
    pub half_width: f64,
    pub step: f64,
}

impl PovmGrid {
    /// Step 0.01 over `|x| <= max(6, sqrt(2 n_max + 1) + 3)`, wide enough for
    /// the highest Fock function to decay below the completeness tolerance.
    pub fn for_cutoff(n_max: usize) -> Self {
        PovmGrid {
            half_width: 6f64.max((2.0 * n_max as f64 + 1.0).sqrt() + 3.0),
            step: 0.01,
        }
    }
}

/// Cached radial tables `G_mn(x; eta)`, `m <= n`, packed row-major.
#[derive(Debug, Clone)]
pub struct QuadraturePovm {
    n_max: usize,
    eta: f64,
    grid: PovmGrid,
    /// `values[i * pairs + pair(m, n)]` at `x_i = -half_width + i * step`.
    values: Vec<f64>,
    points: usize,
}

/// Index of `(m, n)`, `m <= n`, in the packed upper triangle.
pub(crate) fn pair_index(n_max: usize, m: usize, n: usize) -> usize {
    debug_assert!(m <= n);
    m * (2 * n_max + 3 - m) / 2 + (n - m)
}

pub(crate) fn pair_count(n_max: usize) -> usize {
    (n_max + 1) * (n_max + 2) / 2
}

/// Direct evaluation of all `G_mn(x; eta)`, packed.
fn radial_direct(n_max: usize, eta: f64, x: f64) -> Vec<f64> {
    let pairs = pair_count(n_max);
    let mut out = vec![0.0; pairs];
    if eta >= 1.0 {
        let psi = hermite_functions(x, n_max);
        for m in 0..=n_max {
            for n in m..=n_max {
                out[pair_index(n_max, m, n)] = psi[m] * psi[n];
            }
        }
        return out;
    }
    let s = (1.0 - eta).sqrt();
    let se = eta.sqrt();
    // trapezoid over y: spectrally accurate for the smooth, decaying integrand
    let dy = (s / 8.0).min(0.02);
    let centre = x / se;
    let reach = 7.0 * s / se;
    let lo = (centre - reach).max(-12.0);
    let hi = (centre + reach).min(12.0);
    if hi <= lo {
        return out;
    }
    let steps = ((hi - lo) / dy).ceil() as usize;
    let h = (hi - lo) / steps as f64;
    let norm = 1.0 / (std::f64::consts::PI * (1.0 - eta)).sqrt();
    for k in 0..=steps {
        let y = lo + k as f64 * h;
        let u = x - se * y;
        let w = norm * (-u * u / (1.0 - eta)).exp() * h * if k == 0 || k == steps { 0.5 } else { 1.0 };
        let psi = hermite_functions(y, n_max);
        for m in 0..=n_max {
            let wm = w * psi[m];
            let base = pair_index(n_max, m, m);
            for n in m..=n_max {
                out[base + n - m] += wm * psi[n];
            }
        }
    }
    out
}

impl QuadraturePovm {
    pub fn build(n_max: usize, eta: f64, grid: PovmGrid) -> Result<Self> {
        if !(eta > 0.0 && eta <= 1.0) {
            return Err(Error::param("eta", format!("{eta} must lie in (0, 1]")));
        }
        if !(grid.step > 0.0 && grid.half_width > 0.0) {
            return Err(Error::param("grid", "step and half width must be > 0"));
        }
        let points = (2.0 * grid.half_width / grid.step).round() as usize + 1;
        let pairs = pair_count(n_max);
        let mut values = Vec::with_capacity(points * pairs);
        let rows: Vec<Vec<f64>> = {
            use rayon::prelude::*;
            (0..points)
                .into_par_iter()
                .map(|i| radial_direct(n_max, eta, -grid.half_width + i as f64 * grid.step))
                .collect()
        };
        for r in rows {
            values.extend(r);
        }
        let povm = QuadraturePovm {
            n_max,
            eta,
            grid,
            values,
            points,
        };
        let err = povm.completeness_error();
        if err > 1e-4 {
            return Err(Error::GridResolution(err));
        }
        Ok(povm)
    }

    pub fn with_defaults(n_max: usize, eta: f64) -> Result<Self> {
        Self::build(n_max, eta, PovmGrid::for_cutoff(n_max))
    }

    pub fn n_max(&self) -> usize {
        self.n_max
    }

    pub fn eta(&self) -> f64 {
        self.eta
    }

    pub fn grid(&self) -> PovmGrid {
        self.grid
    }

    /// Largest deviation of `int G_mn dx` from `delta_mn` (Simpson on the table).
    pub fn completeness_error(&self) -> f64 {
        let pairs = pair_count(self.n_max);
        let mut acc = vec![0.0; pairs];
        let n = self.points - 1;
        for i in 0..self.points {
            let w = if i == 0 || i == n {
                1.0
            } else if i % 2 == 1 {
                4.0
            } else {
                2.0
            };
            for (a, v) in acc.iter_mut().zip(&self.values[i * pairs..(i + 1) * pairs]) {
                *a += w * v;
            }
        }
        let mut worst: f64 = 0.0;
        for m in 0..=self.n_max {
            for k in m..=self.n_max {
                let v = acc[pair_index(self.n_max, m, k)] * self.grid.step / 3.0;
                let target = if m == k { 1.0 } else { 0.0 };
                worst = worst.max((v - target).abs());
            }
        }
        worst
    }

    /// Packed `G_mn(x)`: 4-point cubic interpolation inside the table,
    /// direct evaluation outside.
    pub fn radial(&self, x: f64) -> Vec<f64> {
        let pairs = pair_count(self.n_max);
        let s = (x + self.grid.half_width) / self.grid.step;
        let i = s.floor() as isize;
        if i < 1 || i + 2 >= self.points as isize {
            return radial_direct(self.n_max, self.eta, x);
        }
        let t = s - i as f64;
        // Lagrange weights on nodes i-1, i, i+1, i+2
        let w = [
            -t * (t - 1.0) * (t - 2.0) / 6.0,
            (t + 1.0) * (t - 1.0) * (t - 2.0) / 2.0,
            -(t + 1.0) * t * (t - 2.0) / 2.0,
            (t + 1.0) * t * (t - 1.0) / 6.0,
        ];
        let mut out = vec![0.0; pairs];
        for (k, wk) in w.iter().enumerate() {
            let row = (i - 1 + k as isize) as usize * pairs;
            for (o, v) in out.iter_mut().zip(&self.values[row..row + pairs]) {
                *o += wk * v;
            }
        }
        out
    }

    /// Single radial element `G_mn(x)` (any order of `m`, `n`).
    pub fn element(&self, m: usize, n: usize, x: f64) -> f64 {
        let (a, b) = if m <= n { (m, n) } else { (n, m) };
        self.radial(x)[pair_index(self.n_max, a, b)]
    }

    /// Full matrix `<m| Pi(x, theta) |n>`.
    pub fn operator(&self, x: f64, theta: f64) -> nalgebra::DMatrix<num_complex::Complex64> {
        let g = self.radial(x);
        let d = self.n_max + 1;
        nalgebra::DMatrix::from_fn(d, d, |m, n| {
            let (a, b) = if m <= n { (m, n) } else { (n, m) };
            num_complex::Complex64::from_polar(g[pair_index(self.n_max, a, b)], (m as f64 - n as f64) * theta)
        })
    }
}

/// Direct (table-free) radial element, for cross-checks.
pub fn radial_element_direct(n_max: usize, eta: f64, m: usize, n: usize, x: f64) -> f64 {
    let (a, b) = if m <= n { (m, n) } else { (n, m) };
    radial_direct(n_max, eta, x)[pair_index(n_max, a, b)]
}
