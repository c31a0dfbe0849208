use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{best_cat, model_covariance, subtract_photon_with_cutoff, wigner_form, AnsatzParams, DEFAULT_N_MAX};
use crate::error::Result;
use crate::gaussian_model::OpoModel;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Objective {
    /// Minimize the Wigner function at the origin.
    MinWignerOrigin,
    /// Maximize the `|1>` population.
    MaxSinglePhoton,
    /// Maximize the best odd-cat fidelity.
    MaxCatFidelity,
}

#[derive(Debug, Clone, Copy)]
pub struct NelderMeadOptions {
    pub max_evaluations: usize,
    /// Stop when the simplex spread in function value drops below this.
    pub f_tol: f64,
    /// Stop when the simplex diameter drops below this.
    pub x_tol: f64,
    pub initial_step: f64,
}

impl Default for NelderMeadOptions {
    fn default() -> Self {
        NelderMeadOptions {
            max_evaluations: 500,
            f_tol: 1e-10,
            x_tol: 1e-6,
            initial_step: 0.5,
        }
    }
}

#[derive(Debug, Clone)]
pub struct NelderMeadResult {
    pub x: Vec<f64>,
    pub value: f64,
    pub evaluations: usize,
    pub converged: bool,
    /// Best point after each iteration.
    pub trace: Vec<(Vec<f64>, f64)>,
}

/// Minimize `f` by Nelder–Mead. Batches of independent points (initial
/// simplex, shrink steps) are evaluated in parallel and merged by index.
pub fn nelder_mead<F>(f: F, x0: &[f64], opts: NelderMeadOptions) -> NelderMeadResult
where
    F: Fn(&[f64]) -> f64 + Sync,
{
    let n = x0.len();
    let eval_batch = |pts: &[Vec<f64>]| -> Vec<f64> {
        pts.par_iter()
            .map(|p| {
                let v = f(p);
                if v.is_nan() {
                    f64::INFINITY
                } else {
                    v
                }
            })
            .collect()
    };
    let mut simplex: Vec<Vec<f64>> = vec![x0.to_vec()];
    for i in 0..n {
        let mut p = x0.to_vec();
        p[i] += opts.initial_step;
        simplex.push(p);
    }
    let mut values = eval_batch(&simplex);
    let mut evals = n + 1;
    let mut trace = Vec::new();
    let mut converged = false;
    let eval_one = |p: &[f64], evals: &mut usize| {
        *evals += 1;
        let v = f(p);
        if v.is_nan() {
            f64::INFINITY
        } else {
            v
        }
    };
    loop {
        let mut order: Vec<usize> = (0..=n).collect();
        order.sort_by(|&a, &b| values[a].total_cmp(&values[b]));
        simplex = order.iter().map(|&i| simplex[i].clone()).collect();
        values = order.iter().map(|&i| values[i]).collect();
        trace.push((simplex[0].clone(), values[0]));
        let spread = values[n] - values[0];
        let diameter = simplex[1..]
            .iter()
            .map(|p| p.iter().zip(&simplex[0]).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max))
            .fold(0.0, f64::max);
        if spread.abs() <= opts.f_tol && diameter <= opts.x_tol.max(1e-3) || diameter <= opts.x_tol {
            converged = true;
            break;
        }
        if evals >= opts.max_evaluations {
            break;
        }
        let centroid: Vec<f64> = (0..n)
            .map(|j| simplex[..n].iter().map(|p| p[j]).sum::<f64>() / n as f64)
            .collect();
        let along = |t: f64| -> Vec<f64> {
            centroid
                .iter()
                .zip(&simplex[n])
                .map(|(c, w)| c + t * (c - w))
                .collect()
        };
        let xr = along(1.0);
        let fr = eval_one(&xr, &mut evals);
        if fr < values[0] {
            let xe = along(2.0);
            let fe = eval_one(&xe, &mut evals);
            if fe < fr {
                simplex[n] = xe;
                values[n] = fe;
            } else {
                simplex[n] = xr;
                values[n] = fr;
            }
            continue;
        }
        if fr < values[n - 1] {
            simplex[n] = xr;
            values[n] = fr;
            continue;
        }
        let (xc, fc) = if fr < values[n] {
            let xc = along(0.5);
            let fc = eval_one(&xc, &mut evals);
            (xc, fc)
        } else {
            let xc = along(-0.5);
            let fc = eval_one(&xc, &mut evals);
            (xc, fc)
        };
        if fc < values[n].min(fr) {
            simplex[n] = xc;
            values[n] = fc;
            continue;
        }
        // shrink towards the best vertex
        let best = simplex[0].clone();
        let shrunk: Vec<Vec<f64>> = simplex[1..]
            .iter()
            .map(|p| p.iter().zip(&best).map(|(a, b)| b + 0.5 * (a - b)).collect())
            .collect();
        let fv = eval_batch(&shrunk);
        evals += n;
        for (i, (p, v)) in shrunk.into_iter().zip(fv).enumerate() {
            simplex[i + 1] = p;
            values[i + 1] = v;
        }
    }
    NelderMeadResult {
        x: simplex[0].clone(),
        value: values[0],
        evaluations: evals,
        converged,
        trace,
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ModeOptimum {
    /// Narrower of the two Ansatz widths, Hz.
    pub gamma_hz: f64,
    /// Wider of the two Ansatz widths, Hz.
    pub kappa_hz: f64,
    /// Objective in its natural sign (W(0,0), or a fidelity).
    pub value: f64,
    pub evaluations: usize,
    pub converged: bool,
    /// `(gamma_hz, kappa_hz, value)` after each iteration.
    pub trace: Vec<(f64, f64, f64)>,
}

const GAMMA_BOX: (f64, f64) = (1e6, 100e6);
const KAPPA_BOX: (f64, f64) = (1e6, 500e6);

fn to_params(v: &[f64]) -> (f64, f64) {
    let g = v[0].exp().clamp(GAMMA_BOX.0, GAMMA_BOX.1);
    let k = v[1].exp().clamp(KAPPA_BOX.0, KAPPA_BOX.1);
    (g, k)
}

/// Objective value in natural sign for an Ansatz mode.
pub fn evaluate_objective(model: &OpoModel, objective: Objective, gamma_hz: f64, kappa_hz: f64) -> Result<f64> {
    let mode = AnsatzParams {
        gamma_hz,
        kappa_hz,
        delay_s: 0.0,
    };
    let cov = model_covariance(model, &mode)?;
    match objective {
        Objective::MinWignerOrigin => Ok(wigner_form(&cov, model.dark_fraction)?.wigner_at_origin()),
        Objective::MaxSinglePhoton => {
            Ok(subtract_photon_with_cutoff(&cov, model.dark_fraction, DEFAULT_N_MAX)?.fock().population(1))
        }
        Objective::MaxCatFidelity => {
            Ok(best_cat(subtract_photon_with_cutoff(&cov, model.dark_fraction, DEFAULT_N_MAX)?.fock()).1)
        }
    }
}

/// Nelder–Mead over `(gamma, kappa)` in log space inside
/// `[1, 100] x [1, 500]` MHz, started at the geometric centre of the box.
///
/// The Ansatz is symmetric under `gamma <-> kappa` up to an overall sign, so
/// the result is reported with `gamma <= kappa`.
pub fn optimize_mode_function(
    model: &OpoModel,
    objective: Objective,
    opts: NelderMeadOptions,
) -> Result<ModeOptimum> {
    model.validate()?;
    let sign = match objective {
        Objective::MinWignerOrigin => 1.0,
        _ => -1.0,
    };
    let cost = |v: &[f64]| {
        let (g, k) = to_params(v);
        if (g - k).abs() < 1e-6 * k {
            return f64::INFINITY;
        }
        // penalize leaving the box so the simplex is pushed back inside
        let excess = (v[0] - g.ln()).abs() + (v[1] - k.ln()).abs();
        match evaluate_objective(model, objective, g, k) {
            Ok(val) => sign * val + excess,
            Err(_) => f64::INFINITY,
        }
    };
    let x0 = [
        (GAMMA_BOX.0 * GAMMA_BOX.1).sqrt().ln(),
        (KAPPA_BOX.0 * KAPPA_BOX.1).sqrt().ln(),
    ];
    let res = nelder_mead(cost, &x0, opts);
    let (g, k) = to_params(&res.x);
    let value = evaluate_objective(model, objective, g, k)?;
    Ok(ModeOptimum {
        gamma_hz: g.min(k),
        kappa_hz: g.max(k),
        value,
        evaluations: res.evaluations,
        converged: res.converged,
        trace: res
            .trace
            .iter()
            .map(|(x, v)| {
                let (g, k) = to_params(x);
                (g.min(k), g.max(k), sign * v)
            })
            .collect(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn recovers_known_minimum() {
        let f = |v: &[f64]| (v[0] - 1.3).powi(2) + 3.0 * (v[1] + 0.4).powi(2) + 0.5 * (v[0] - 1.3) * (v[1] + 0.4);
        let r = nelder_mead(f, &[0.0, 0.0], NelderMeadOptions::default());
        assert!(r.converged);
        assert!((r.x[0] - 1.3).abs() < 0.013 && (r.x[1] + 0.4).abs() < 0.004);
    }

    #[test]
    fn trace_is_monotone() {
        let f = |v: &[f64]| (v[0] * v[0] + 10.0 * v[1] * v[1]).sqrt();
        let r = nelder_mead(f, &[2.0, 1.0], NelderMeadOptions::default());
        for w in r.trace.windows(2) {
            assert!(w[1].1 <= w[0].1);
        }
    }
}
