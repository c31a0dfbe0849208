use nalgebra::{Matrix2, Matrix4};

use super::expo;
use super::kernel::CorrelationKernel;
use super::mode::{ModeShape, TemporalMode};
use super::{output_kernels, OpoModel};
use crate::error::{Error, Result};
use crate::quadrature::{integrate, QuadOptions};

const PHYSICALITY_TOL: f64 = 1e-9;

/// Covariance `gamma_ij = 2 Re<y_i y_j>` of `(x_t, p_t, x_s, p_s)`; vacuum is
/// the identity.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TwoModeCovariance {
    matrix: Matrix4<f64>,
}

impl TwoModeCovariance {
    pub fn vacuum() -> Self {
        TwoModeCovariance {
            matrix: Matrix4::identity(),
        }
    }

    /// Validates symmetry and physicality.
    pub fn new(matrix: Matrix4<f64>) -> Result<Self> {
        if matrix.iter().any(|v| !v.is_finite()) {
            return Err(Error::param("covariance", "non-finite entry"));
        }
        let asym = (matrix - matrix.transpose()).amax();
        if asym > 1e-12 * matrix.amax().max(1.0) {
            return Err(Error::param("covariance", format!("not symmetric (|C - C^T| = {asym:e})")));
        }
        let cov = TwoModeCovariance {
            matrix: 0.5 * (matrix + matrix.transpose()),
        };
        let nu = cov.min_symplectic_eigenvalue();
        if !(nu >= 0.5 - PHYSICALITY_TOL) {
            return Err(Error::Unphysical(nu));
        }
        Ok(cov)
    }

    pub fn matrix(&self) -> &Matrix4<f64> {
        &self.matrix
    }

    pub fn to_rows(&self) -> [[f64; 4]; 4] {
        let mut out = [[0.0; 4]; 4];
        for (i, row) in out.iter_mut().enumerate() {
            for (j, v) in row.iter_mut().enumerate() {
                *v = self.matrix[(i, j)];
            }
        }
        out
    }

    pub fn trigger_block(&self) -> Matrix2<f64> {
        self.matrix.fixed_view::<2, 2>(0, 0).into_owned()
    }

    pub fn signal_block(&self) -> Matrix2<f64> {
        self.matrix.fixed_view::<2, 2>(2, 2).into_owned()
    }

    /// Rows trigger, columns signal.
    pub fn cross_block(&self) -> Matrix2<f64> {
        self.matrix.fixed_view::<2, 2>(0, 2).into_owned()
    }

    /// Symplectic eigenvalues `(nu_-, nu_+)` of `gamma/2`.
    ///
    /// Computed as singular values of `S Omega S` with `S = (gamma/2)^(1/2)`,
    /// which stays accurate near pure states where the closed form loses
    /// half its digits.
    pub fn symplectic_eigenvalues(&self) -> (f64, f64) {
        let eig = (self.matrix * 0.5).symmetric_eigen();
        let sqrt_vals = eig.eigenvalues.map(|v| v.max(0.0).sqrt());
        let s = &eig.eigenvectors * Matrix4::from_diagonal(&sqrt_vals) * eig.eigenvectors.transpose();
        let mut omega = Matrix4::zeros();
        omega[(0, 1)] = 1.0;
        omega[(1, 0)] = -1.0;
        omega[(2, 3)] = 1.0;
        omega[(3, 2)] = -1.0;
        let a = s * omega * s;
        let mut ev: Vec<f64> = (a.transpose() * a).symmetric_eigenvalues().iter().copied().collect();
        ev.sort_by(f64::total_cmp);
        let lo = (0.5 * (ev[0] + ev[1])).max(0.0).sqrt();
        let hi = (0.5 * (ev[2] + ev[3])).max(0.0).sqrt();
        (lo, hi)
    }

    pub fn min_symplectic_eigenvalue(&self) -> f64 {
        self.symplectic_eigenvalues().0
    }

    pub fn is_physical(&self) -> bool {
        self.min_symplectic_eigenvalue() >= 0.5 - PHYSICALITY_TOL
    }
}

fn ensure_normalized(m: &TemporalMode) -> Result<()> {
    let n2 = m.norm_squared();
    if (n2 - 1.0).abs() > 1e-10 {
        return Err(Error::ModeNotNormalized(n2));
    }
    Ok(())
}

/// `int int f(t) g(t') C(t - t') dt dt'`.
///
/// Exact for the exponential families; sampled modes go through
/// [`mode_overlap_quadrature`].
pub fn mode_overlap(kernel: &CorrelationKernel, f: &TemporalMode, g: &TemporalMode) -> Result<f64> {
    ensure_normalized(f)?;
    ensure_normalized(g)?;
    if kernel.is_zero() {
        return Ok(0.0);
    }
    match (f.pieces(), g.pieces()) {
        (Some(pf), Some(pg)) => Ok(kernel
            .terms()
            .iter()
            .map(|t| t.coefficient * expo::exp_overlap(&pf, &pg, t.rate))
            .sum()),
        _ => mode_overlap_quadrature(kernel, f, g),
    }
}

/// Nested adaptive Gauss–Kronrod evaluation of the overlap integral.
pub fn mode_overlap_quadrature(
    kernel: &CorrelationKernel,
    f: &TemporalMode,
    g: &TemporalMode,
) -> Result<f64> {
    ensure_normalized(f)?;
    ensure_normalized(g)?;
    let (fa, fb) = f.support();
    let (ga, gb) = g.support();
    let gbreaks = g.breakpoints();
    let inner_opts = QuadOptions {
        abs_tol: 1e-300,
        rel_tol: 1e-12,
        max_segments: 20_000,
    };
    let mut total = 0.0;
    for term in kernel.terms() {
        let r = term.rate;
        let h = |t: f64| {
            let mut breaks = gbreaks.clone();
            breaks.push(t);
            integrate(
                |s| g.eval(s) * (-r * (t - s).abs()).exp(),
                ga,
                gb,
                &breaks,
                inner_opts,
            )
        };
        let outer = integrate(|t| f.eval(t) * h(t), fa, fb, &f.breakpoints(), inner_opts);
        total += term.coefficient * outer;
    }
    Ok(total)
}

/// Joint covariance of trigger and signal modes behind the tapping beam
/// splitter, with all losses.
pub fn assemble_covariance(
    model: &OpoModel,
    trigger: &TemporalMode,
    signal: &TemporalMode,
) -> Result<TwoModeCovariance> {
    model.validate()?;
    if matches!(trigger.shape(), ModeShape::Ansatz { .. }) {
        return Err(Error::NonCausalTrigger);
    }
    let (anti, squeezed) = output_kernels(model)?;
    let r2 = model.bs_reflectivity;
    let t2 = model.transmissivity();
    let eta_t = model.trigger_efficiency();
    let eta_s = model.signal_efficiency();
    let mut m = Matrix4::identity();
    for (i, kernel) in [anti, squeezed].iter().enumerate() {
        let ff = mode_overlap(kernel, trigger, trigger)?;
        let uu = mode_overlap(kernel, signal, signal)?;
        let fu = mode_overlap(kernel, trigger, signal)?;
        m[(i, i)] = 1.0 + 2.0 * r2 * eta_t * ff;
        m[(2 + i, 2 + i)] = 1.0 + 2.0 * t2 * eta_s * uu;
        let c = 2.0 * (r2 * t2 * eta_t * eta_s).sqrt() * fu;
        m[(i, 2 + i)] = c;
        m[(2 + i, i)] = c;
    }
    let cov = TwoModeCovariance { matrix: m };
    let nu = cov.min_symplectic_eigenvalue();
    if !(nu >= 0.5 - PHYSICALITY_TOL) {
        return Err(Error::Unphysical(nu));
    }
    Ok(cov)
}
