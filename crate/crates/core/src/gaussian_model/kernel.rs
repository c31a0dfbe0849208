use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// One term `coefficient * exp(-rate |tau|)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct KernelTerm {
    pub coefficient: f64,
    /// Decay rate, rad/s. Strictly positive.
    pub rate: f64,
}

/// Excess quadrature correlation `C(tau) = sum_i c_i exp(-r_i |tau|)`.
///
/// The vacuum contribution `delta(tau)/2` is never stored; every consumer
/// adds it where needed.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CorrelationKernel {
    terms: Vec<KernelTerm>,
}

impl CorrelationKernel {
    pub fn new(terms: Vec<KernelTerm>) -> Result<Self> {
        for t in &terms {
            if !(t.rate.is_finite() && t.rate > 0.0) {
                return Err(Error::param("rate", format!("kernel rate {} must be > 0", t.rate)));
            }
            if !t.coefficient.is_finite() {
                return Err(Error::param("coefficient", "kernel coefficient must be finite"));
            }
        }
        Ok(CorrelationKernel { terms })
    }

    pub fn zero() -> Self {
        CorrelationKernel { terms: Vec::new() }
    }

    pub fn terms(&self) -> &[KernelTerm] {
        &self.terms
    }

    pub fn is_zero(&self) -> bool {
        self.terms.iter().all(|t| t.coefficient == 0.0)
    }

    /// Always true: the `delta(tau)/2` floor is implicit.
    pub fn vacuum_floor_implicit(&self) -> bool {
        true
    }

    pub fn value(&self, tau: f64) -> f64 {
        let a = tau.abs();
        self.terms
            .iter()
            .map(|t| t.coefficient * (-t.rate * a).exp())
            .sum()
    }

    /// Fourier transform `int C(tau) exp(-i omega tau) d tau`.
    pub fn spectral_density(&self, omega: f64) -> f64 {
        self.terms
            .iter()
            .map(|t| 2.0 * t.coefficient * t.rate / (t.rate * t.rate + omega * omega))
            .sum()
    }

    pub fn scaled(&self, factor: f64) -> Self {
        CorrelationKernel {
            terms: self
                .terms
                .iter()
                .map(|t| KernelTerm {
                    coefficient: t.coefficient * factor,
                    rate: t.rate,
                })
                .collect(),
        }
    }

    /// Kernel of the rotated quadrature `x cos(theta) + p sin(theta)` for
    /// decoupled `X`/`P` kernels.
    pub fn rotated(anti: &Self, squeezed: &Self, theta: f64) -> Self {
        let (s, c) = theta.sin_cos();
        let mut terms: Vec<KernelTerm> = anti.scaled(c * c).terms;
        terms.extend(squeezed.scaled(s * s).terms);
        CorrelationKernel { terms }
    }
}
