use crate::fock::DensityMatrix;

/// Normalized odd cat `|alpha> - |-alpha>` for real `alpha`, truncated at
/// `n_max` but normalized over the full space.
pub fn odd_cat(alpha: f64, n_max: usize) -> Vec<f64> {
    let a2 = alpha * alpha;
    let norm = 2.0 * (-0.5 * a2).exp() / (2.0 * -(-2.0 * a2).exp_m1()).sqrt();
    let mut out = vec![0.0; n_max + 1];
    // alpha^n / sqrt(n!) built incrementally
    let mut term = 1.0;
    for (n, c) in out.iter_mut().enumerate() {
        if n > 0 {
            term *= alpha / (n as f64).sqrt();
        }
        if n % 2 == 1 {
            *c = norm * term;
        }
    }
    out
}

/// Fock coefficients of `a S(r)|0>` for squeezing along `p`, normalized on
/// `0..=n_max`. Only odd entries are nonzero.
pub fn ideal_subtracted_sv(r: f64, n_max: usize) -> Vec<f64> {
    let t = r.tanh();
    let mut out = vec![0.0; n_max + 1];
    // a_n = t^n sqrt((2n)!) / (2^n n!), the |2n> amplitude of S|0>
    let mut a = 1.0;
    let mut n = 1usize;
    while 2 * n - 1 <= n_max {
        let nf = n as f64;
        a *= t * ((2.0 * nf - 1.0) * 2.0 * nf).sqrt() / (2.0 * nf);
        out[2 * n - 1] = a * (2.0 * nf).sqrt();
        n += 1;
    }
    let norm = out.iter().map(|c| c * c).sum::<f64>().sqrt();
    if norm > 0.0 {
        out.iter_mut().for_each(|c| *c /= norm);
    } else if n_max >= 1 {
        out[1] = 1.0;
    }
    out
}

/// `<cat_alpha| rho |cat_alpha>`.
pub fn cat_fidelity(rho: &DensityMatrix, alpha: f64) -> f64 {
    rho.overlap_pure(&odd_cat(alpha, rho.n_max())).clamp(0.0, 1.0)
}

/// Best odd-cat amplitude on `[0.1, 3]`: coarse scan to bracket, then
/// golden-section refinement to `1e-4` in alpha.
pub fn best_cat(rho: &DensityMatrix) -> (f64, f64) {
    let (lo, hi) = (0.1, 3.0);
    let steps = 58;
    let h = (hi - lo) / steps as f64;
    let f = |a: f64| cat_fidelity(rho, a);
    let (mut i_best, mut f_best) = (0, f(lo));
    for i in 1..=steps {
        let v = f(lo + i as f64 * h);
        if v > f_best {
            i_best = i;
            f_best = v;
        }
    }
    let mut a = (lo + (i_best as f64 - 1.0) * h).max(lo);
    let mut b = (lo + (i_best as f64 + 1.0) * h).min(hi);
    let g = 0.5 * (5f64.sqrt() - 1.0);
    let mut c = b - g * (b - a);
    let mut d = a + g * (b - a);
    let (mut fc, mut fd) = (f(c), f(d));
    while b - a > 1e-4 {
        if fc > fd {
            b = d;
            d = c;
            fd = fc;
            c = b - g * (b - a);
            fc = f(c);
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + g * (b - a);
            fd = f(d);
        }
    }
    let x = 0.5 * (a + b);
    let fx = f(x);
    if fx >= f_best {
        (x, fx)
    } else {
        (lo + i_best as f64 * h, f_best)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn cat_is_normalized() {
        for alpha in [0.1, 0.5, 1.0, 1.5, 2.0] {
            let s: f64 = odd_cat(alpha, 24).iter().map(|c| c * c).sum();
            assert!((s - 1.0).abs() < 1e-10, "{alpha}: {s}");
        }
    }

    #[test]
    fn small_cat_is_single_photon() {
        let rho = DensityMatrix::number_state(1, 10);
        assert!(cat_fidelity(&rho, 1e-3) > 1.0 - 1e-6);
    }

    #[test]
    fn weak_squeezing_gives_single_photon() {
        let c = ideal_subtracted_sv(1e-4, 9);
        assert!((c[1] - 1.0).abs() < 1e-8);
    }

    #[test]
    fn coefficient_ratios() {
        let t: f64 = 0.3;
        let c = ideal_subtracted_sv(t.atanh(), 15);
        assert!((c[3] / c[1] - 1.5f64.sqrt() * t).abs() < 1e-12);
        assert!((c[5] / c[1] - (15.0f64 / 8.0).sqrt() * t * t).abs() < 1e-12);
    }

    #[test]
    fn best_cat_beats_samples() {
        let psi = ideal_subtracted_sv(0.4, 20);
        let rho = DensityMatrix::from_real_pure(&psi);
        let (a, f) = best_cat(&rho);
        for k in 1..30 {
            assert!(f >= cat_fidelity(&rho, 0.1 * k as f64) - 1e-12);
        }
        assert!(a > 0.1 && a < 3.0);
    }
}
