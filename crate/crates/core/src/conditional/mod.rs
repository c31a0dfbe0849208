//! Heralded single-photon subtraction on the trigger mode.
//!
//! Applying `a_t rho a_t^dagger` and tracing out the trigger turns the joint
//! Gaussian Wigner function into `(c0 + z^T Q z) G(z)` on the signal phase
//! space `z = (x, p)`, where `G` is the unconditioned signal Gaussian. With
//! `sigma = gamma/2` split into trigger/signal blocks,
//! `M = sigma_ts sigma_ss^-1`, `Q = M^T M` and
//! `c0 = tr(sigma_tt - M sigma_ss M^T) - 1`.
//! The normalization is `c0 + tr(Q sigma_ss) = <n_t> * 2`.

mod cat;
mod optimize;

pub use cat::{best_cat, cat_fidelity, ideal_subtracted_sv, odd_cat};
pub use optimize::{
    evaluate_objective, nelder_mead, optimize_mode_function, ModeOptimum, NelderMeadOptions, NelderMeadResult, Objective,
};

pub use crate::fock::{wigner_at_origin, wigner_from_fock};

use std::f64::consts::PI;

use nalgebra::{DMatrix, Matrix2, Vector2};
use num_complex::Complex64;
use rayon::prelude::*;
use statrs::function::erf::erfc;

use crate::error::{Error, Result};
use crate::fock::{wigner_kernels, DensityMatrix};
use crate::gaussian_model::{assemble_covariance, OpoModel, TemporalMode, TwoModeCovariance};

pub const DEFAULT_N_MAX: usize = 12;

/// Heralded signal state in Wigner and Fock form.
#[derive(Debug, Clone)]
pub struct ConditionalState {
    /// Covariance of `(x, p)` in the unconditioned signal mode (vacuum 1/2).
    sigma: Matrix2<f64>,
    /// Conditioned Wigner polynomial, normalized: `a + z^T B z`.
    a: f64,
    b: Matrix2<f64>,
    dark_fraction: f64,
    /// `<n_t>` of the trigger mode before the click.
    trigger_photons: f64,
    fock: DensityMatrix,
}

/// Conditions `cov` on a trigger click; `dark_fraction` of the heralds are
/// uncorrelated with the field.
pub fn subtract_photon(cov: &TwoModeCovariance, dark_fraction: f64) -> Result<ConditionalState> {
    subtract_photon_with_cutoff(cov, dark_fraction, DEFAULT_N_MAX)
}

pub fn subtract_photon_with_cutoff(
    cov: &TwoModeCovariance,
    dark_fraction: f64,
    n_max: usize,
) -> Result<ConditionalState> {
    let mut state = wigner_form(cov, dark_fraction)?;
    state.fock = fock_from_wigner_form(&state, n_max)?;
    Ok(state)
}

/// Wigner-form only; the Fock matrix is left empty (`n_max = 0` vacuum
/// placeholder). Cheap enough for use inside optimizers.
pub fn wigner_form(cov: &TwoModeCovariance, dark_fraction: f64) -> Result<ConditionalState> {
    if !(0.0..=1.0).contains(&dark_fraction) {
        return Err(Error::param("dark_fraction", format!("{dark_fraction} must lie in [0, 1]")));
    }
    if !cov.is_physical() {
        return Err(Error::Unphysical(cov.min_symplectic_eigenvalue()));
    }
    let s_tt = cov.trigger_block() * 0.5;
    let s_ss = cov.signal_block() * 0.5;
    let s_ts = cov.cross_block() * 0.5;
    let inv = s_ss
        .try_inverse()
        .ok_or_else(|| Error::param("covariance", "singular signal block"))?;
    let m = s_ts * inv;
    let q = m.transpose() * m;
    let c0 = (s_tt - m * s_ss * m.transpose()).trace() - 1.0;
    let norm = 0.5 * (cov.trigger_block().trace() - 2.0);
    if !(norm > 1e-300) {
        return Err(Error::DegenerateHerald(norm));
    }
    Ok(ConditionalState {
        sigma: s_ss,
        a: c0 / norm,
        b: q / norm,
        dark_fraction,
        trigger_photons: 0.5 * norm,
        fock: DensityMatrix::number_state(0, 0),
    })
}

impl ConditionalState {
    /// State with Wigner function `[(1-d)(a + z^T B z) + d] G_sigma(z)`.
    /// Requires `a + tr(B sigma) = 1`.
    pub fn from_wigner_form(
        sigma: Matrix2<f64>,
        a: f64,
        b: Matrix2<f64>,
        dark_fraction: f64,
        n_max: usize,
    ) -> Result<Self> {
        if !(sigma.determinant() >= 0.25 - 1e-12 && sigma[(0, 0)] > 0.0) {
            return Err(Error::param("sigma", "violates the uncertainty relation"));
        }
        if !(0.0..=1.0).contains(&dark_fraction) {
            return Err(Error::param("dark_fraction", format!("{dark_fraction} must lie in [0, 1]")));
        }
        let total = a + (b * sigma).trace();
        if (total - 1.0).abs() > 1e-12 {
            return Err(Error::param("a", format!("Wigner form integrates to {total}, not 1")));
        }
        let mut st = ConditionalState {
            sigma,
            a,
            b: 0.5 * (b + b.transpose()),
            dark_fraction,
            trigger_photons: 0.0,
            fock: DensityMatrix::number_state(0, 0),
        };
        st.fock = fock_from_wigner_form(&st, n_max)?;
        Ok(st)
    }

    pub fn vacuum() -> Self {
        Self::gaussian(Matrix2::identity() * 0.5).expect("vacuum is physical")
    }

    /// Zero-mean Gaussian state with covariance `sigma` (vacuum = I/2).
    pub fn gaussian(sigma: Matrix2<f64>) -> Result<Self> {
        Self::from_wigner_form(sigma, 1.0, Matrix2::zeros(), 0.0, DEFAULT_N_MAX)
    }

    /// `|1>`: `(2|z|^2 - 1)` times the vacuum Gaussian.
    pub fn single_photon() -> Self {
        Self::from_wigner_form(Matrix2::identity() * 0.5, -1.0, Matrix2::identity() * 2.0, 0.0, DEFAULT_N_MAX)
            .expect("single photon is valid")
    }

    /// Signal covariance before conditioning, vacuum = diag(1/2, 1/2).
    pub fn signal_covariance(&self) -> Matrix2<f64> {
        self.sigma
    }

    /// `(a, B)` of the conditioned polynomial `a + z^T B z`, excluding the
    /// dark-count admixture.
    pub fn polynomial(&self) -> (f64, Matrix2<f64>) {
        (self.a, self.b)
    }

    pub fn dark_fraction(&self) -> f64 {
        self.dark_fraction
    }

    /// Mean trigger-mode photon number; the click probability is proportional.
    pub fn trigger_photon_number(&self) -> f64 {
        self.trigger_photons
    }

    pub fn fock(&self) -> &DensityMatrix {
        &self.fock
    }

    pub fn n_max(&self) -> usize {
        self.fock.n_max()
    }

    fn envelope(&self, z: Vector2<f64>) -> f64 {
        let det = self.sigma.determinant();
        let inv = self.sigma.try_inverse().expect("checked at construction");
        (-0.5 * (z.transpose() * inv * z)[(0, 0)]).exp() / (2.0 * PI * det.sqrt())
    }

    /// Full polynomial prefactor including dark counts.
    fn prefactor(&self, z: Vector2<f64>) -> f64 {
        let d = self.dark_fraction;
        (1.0 - d) * (self.a + (z.transpose() * self.b * z)[(0, 0)]) + d
    }

    pub fn wigner(&self, x: f64, p: f64) -> f64 {
        let z = Vector2::new(x, p);
        self.prefactor(z) * self.envelope(z)
    }

    /// Analytic `W(0, 0)`.
    pub fn wigner_at_origin(&self) -> f64 {
        self.wigner(0.0, 0.0)
    }

    /// `int W dx dp`, evaluated from the Gaussian moment identity.
    pub fn wigner_integral(&self) -> f64 {
        let d = self.dark_fraction;
        (1.0 - d) * (self.a + (self.b * self.sigma).trace()) + d
    }

    /// Exact marginal distribution of `x cos(theta) + p sin(theta)`.
    pub fn marginal(&self, theta: f64) -> Result<QuadratureMarginal> {
        let (s, c) = theta.sin_cos();
        let r = Matrix2::new(c, -s, s, c);
        let sig = r.transpose() * self.sigma * r;
        let bq = r.transpose() * self.b * r;
        let var = sig[(0, 0)];
        let beta = sig[(0, 1)] / var;
        let v = sig[(1, 1)] - sig[(0, 1)] * sig[(0, 1)] / var;
        let d = self.dark_fraction;
        let a = (1.0 - d) * (self.a + bq[(1, 1)] * v) + d;
        let b = (1.0 - d) * (bq[(0, 0)] + 2.0 * bq[(0, 1)] * beta + bq[(1, 1)] * beta * beta);
        let tol = 1e-12;
        if a < -tol || b < -tol || !(var > 0.0) {
            return Err(Error::InvalidState { theta });
        }
        Ok(QuadratureMarginal {
            a: a.max(0.0),
            b: b.max(0.0),
            variance: var,
        })
    }
}

/// `P(x) = (a + b x^2) N(x; 0, variance)` with `a + b variance = 1`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct QuadratureMarginal {
    pub a: f64,
    pub b: f64,
    pub variance: f64,
}

fn std_normal_cdf(t: f64) -> f64 {
    0.5 * erfc(-t / std::f64::consts::SQRT_2)
}

impl QuadratureMarginal {
    pub fn pdf(&self, x: f64) -> f64 {
        let s2 = self.variance;
        (self.a + self.b * x * x) * (-0.5 * x * x / s2).exp() / (2.0 * PI * s2).sqrt()
    }

    pub fn cdf(&self, x: f64) -> f64 {
        let s = self.variance.sqrt();
        let t = x / s;
        let phi = (-0.5 * t * t).exp() / (2.0 * PI).sqrt();
        let big_phi = std_normal_cdf(t);
        self.a * big_phi + self.b * self.variance * (big_phi - t * phi)
    }

    /// Inverse CDF by safeguarded Newton iteration, accurate to ~1e-12 in x.
    pub fn quantile(&self, u: f64) -> f64 {
        let s = self.variance.sqrt();
        let (mut lo, mut hi) = (-40.0 * s, 40.0 * s);
        let mut x = 0.0;
        for _ in 0..200 {
            let f = self.cdf(x) - u;
            if f > 0.0 {
                hi = x;
            } else {
                lo = x;
            }
            let d = self.pdf(x);
            let mut next = if d > 1e-300 { x - f / d } else { 0.5 * (lo + hi) };
            if !(next > lo && next < hi) {
                next = 0.5 * (lo + hi);
            }
            if (next - x).abs() <= 1e-13 * s.max(x.abs()) {
                return next;
            }
            x = next;
        }
        x
    }
}

/// `rho_mn = 2 pi int W(z) conj(W_{|m><n|}(z)) d^2 z` on a uniform grid.
fn fock_from_wigner_form(state: &ConditionalState, n_max: usize) -> Result<DensityMatrix> {
    let eig = state.sigma.symmetric_eigenvalues();
    let s_min = eig.min().sqrt();
    let s_max = eig.max().sqrt();
    let h = (s_min / 4.0).min(0.05);
    let half = (8.0 * s_max).max(6.0);
    let n = (half / h).ceil() as i64;
    let d = n_max + 1;
    let rows: Vec<DMatrix<Complex64>> = (-n..=n)
        .into_par_iter()
        .map(|i| {
            let x = i as f64 * h;
            let mut acc = DMatrix::<Complex64>::zeros(d, d);
            for j in -n..=n {
                let p = j as f64 * h;
                let w = state.wigner(x, p);
                if w == 0.0 {
                    continue;
                }
                let k = wigner_kernels(x, p, n_max);
                for m in 0..d {
                    for l in 0..=m {
                        acc[(m, l)] += k[(m, l)].conj() * w;
                    }
                }
            }
            acc
        })
        .collect();
    let mut rho = DMatrix::<Complex64>::zeros(d, d);
    for r in &rows {
        rho += r;
    }
    rho *= Complex64::new(2.0 * PI * h * h, 0.0);
    for m in 0..d {
        rho[(m, m)].im = 0.0;
        for l in 0..m {
            rho[(l, m)] = rho[(m, l)].conj();
        }
    }
    let out = DensityMatrix::new(rho)?;
    let min_ev = out.eigenvalues()[0];
    if min_ev < -1e-6 {
        return Err(Error::GridResolution(min_ev));
    }
    Ok(out)
}

/// Temporal mode parameters of the signal Ansatz, full widths in Hz.
#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct AnsatzParams {
    pub gamma_hz: f64,
    pub kappa_hz: f64,
    /// Offset of the mode centre from the click, seconds.
    pub delay_s: f64,
}

impl Default for AnsatzParams {
    fn default() -> Self {
        AnsatzParams {
            gamma_hz: 9e6,
            kappa_hz: 48e6,
            delay_s: 0.0,
        }
    }
}

impl AnsatzParams {
    pub fn mode(&self) -> Result<TemporalMode> {
        TemporalMode::ansatz(self.gamma_hz, self.kappa_hz, self.delay_s)
    }
}

/// Covariance of the trigger mode (click at `t = 0`) and the Ansatz signal mode.
pub fn model_covariance(model: &OpoModel, mode: &AnsatzParams) -> Result<TwoModeCovariance> {
    let trigger = TemporalMode::trigger(model.trigger_filter_hwhm_hz, 0.0)?;
    assemble_covariance(model, &trigger, &mode.mode()?)
}

/// Full chain `OpoModel -> covariance -> conditional state`, with the
/// model's own dark fraction.
pub fn model_state(model: &OpoModel, mode: &AnsatzParams, n_max: usize) -> Result<ConditionalState> {
    let cov = model_covariance(model, mode)?;
    subtract_photon_with_cutoff(&cov, model.dark_fraction, n_max)
}

#[cfg(test)]
mod tests {
    use super::*;
    use nalgebra::Matrix4;

    fn tmsv(lambda: f64) -> TwoModeCovariance {
        // two-mode squeezed vacuum with tanh r = lambda
        let r = lambda.atanh();
        let (c, s) = ((2.0 * r).cosh(), (2.0 * r).sinh());
        let mut m = Matrix4::zeros();
        for i in 0..4 {
            m[(i, i)] = c;
        }
        m[(0, 2)] = s;
        m[(2, 0)] = s;
        m[(1, 3)] = -s;
        m[(3, 1)] = -s;
        TwoModeCovariance::new(m).unwrap()
    }

    #[test]
    fn uncorrelated_trigger_gives_unconditioned_state() {
        let mut m = Matrix4::identity();
        m[(0, 0)] = 2.0;
        m[(1, 1)] = 2.0;
        m[(2, 2)] = 2.5;
        m[(3, 3)] = 0.5;
        let cov = TwoModeCovariance::new(m).unwrap();
        let st = subtract_photon(&cov, 0.0).unwrap();
        let (a, b) = st.polynomial();
        assert!((a - 1.0).abs() < 1e-15 && b.amax() < 1e-15);
        let g = 1.0 / (2.0 * PI * (1.25f64 * 0.25).sqrt());
        assert!((st.wigner_at_origin() - g).abs() < 1e-12);
    }

    #[test]
    fn weak_two_mode_squeezing_heralds_single_photon() {
        let st = subtract_photon(&tmsv(1e-3), 0.0).unwrap();
        assert!(st.fock().population(1) > 1.0 - 1e-5);
        assert!((st.wigner_at_origin() + 1.0 / PI).abs() < 1e-5);
    }

    #[test]
    fn normalized_and_consistent_at_origin() {
        let st = subtract_photon(&tmsv(0.4), 0.1).unwrap();
        assert!((st.wigner_integral() - 1.0).abs() < 1e-12);
        assert!((st.wigner_at_origin() - st.fock().wigner_at_origin()).abs() < 1e-6);
        assert!((st.fock().trace() - 1.0).abs() < 1e-4);
    }

    #[test]
    fn no_herald_without_trigger_light() {
        assert!(matches!(
            subtract_photon(&TwoModeCovariance::vacuum(), 0.0),
            Err(Error::DegenerateHerald(_))
        ));
    }

    #[test]
    fn marginal_is_normalized_and_inverts() {
        let st = subtract_photon(&tmsv(0.5), 0.0).unwrap();
        for theta in [0.0, 0.7, 2.0] {
            let m = st.marginal(theta).unwrap();
            assert!((m.a + m.b * m.variance - 1.0).abs() < 1e-12);
            assert!((m.cdf(50.0) - 1.0).abs() < 1e-14);
            for u in [1e-6, 0.1, 0.5, 0.93] {
                assert!((m.cdf(m.quantile(u)) - u).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn fock_marginal_matches_single_photon() {
        let st = subtract_photon(&tmsv(1e-4), 0.0).unwrap();
        let m = st.marginal(0.3).unwrap();
        for x in [0.0f64, 0.5, 1.3] {
            let exact = 2.0 * x * x * (-x * x).exp() / PI.sqrt();
            assert!((m.pdf(x) - exact).abs() < 1e-6);
        }
    }
}
