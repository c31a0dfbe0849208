//! Shared oracles for the integration and acceptance tests.
#![allow(dead_code)]

use nalgebra::{DMatrix, Matrix4};
use num_complex::Complex64;
use photonsub::gaussian_model::TwoModeCovariance;
use rand::Rng;

/// Density-matrix elements of a zero-mean two-mode Gaussian state from the
/// loop-hafnian recursion.
///
/// `cov` uses the ordering `(x_1, p_1, x_2, p_2)`, vacuum = identity. The
/// returned closure-free table is indexed `[k1][k2][l1][l2]` for
/// `<k1 k2| rho |l1 l2>` with `k1, l1 <= c1` and `k2, l2 <= c2`.
pub struct GaussianFock {
    c1: usize,
    c2: usize,
    table: Vec<Complex64>,
}

impl GaussianFock {
    fn idx(&self, k: [usize; 4]) -> usize {
        ((k[0] * (self.c2 + 1) + k[1]) * (self.c1 + 1) + k[2]) * (self.c2 + 1) + k[3]
    }

    pub fn get(&self, k1: usize, k2: usize, l1: usize, l2: usize) -> Complex64 {
        self.table[self.idx([k1, k2, l1, l2])]
    }

    pub fn new(cov: &Matrix4<f64>, c1: usize, c2: usize) -> Self {
        // real covariance reordered to (x1, x2, p1, p2), vacuum = I/2
        let perm = [0usize, 2, 1, 3];
        let sr = DMatrix::from_fn(4, 4, |i, j| Complex64::new(0.5 * cov[(perm[i], perm[j])], 0.0));
        let s = Complex64::new(std::f64::consts::FRAC_1_SQRT_2, 0.0);
        let i = Complex64::new(0.0, 1.0);
        let mut w = DMatrix::<Complex64>::zeros(4, 4);
        for m in 0..2 {
            w[(m, m)] = s;
            w[(m, m + 2)] = s * i;
            w[(m + 2, m)] = s;
            w[(m + 2, m + 2)] = -s * i;
        }
        let sc = &w * sr * w.adjoint();
        let q = sc + DMatrix::<Complex64>::identity(4, 4) * Complex64::new(0.5, 0.0);
        let qinv = q.clone().try_inverse().expect("Q invertible");
        let b = (DMatrix::<Complex64>::identity(4, 4) - qinv).map(|z| z.conj());
        let mut a = DMatrix::<Complex64>::zeros(4, 4);
        for r in 0..4 {
            let src = (r + 2) % 4;
            for c in 0..4 {
                a[(r, c)] = b[(src, c)];
            }
        }
        let t = Complex64::new(1.0, 0.0) / q.determinant().sqrt();
        let dims = [c1 + 1, c2 + 1, c1 + 1, c2 + 1];
        let total = dims.iter().product();
        let mut out = GaussianFock {
            c1,
            c2,
            table: vec![Complex64::new(0.0, 0.0); total],
        };
        out.table[0] = t;
        // visit in order of increasing total photon number
        let mut keys: Vec<[usize; 4]> = Vec::with_capacity(total);
        for k0 in 0..dims[0] {
            for k1 in 0..dims[1] {
                for k2 in 0..dims[2] {
                    for k3 in 0..dims[3] {
                        keys.push([k0, k1, k2, k3]);
                    }
                }
            }
        }
        keys.sort_by_key(|k| k.iter().sum::<usize>());
        for k in keys.into_iter().skip(1) {
            let i = (0..4).find(|&i| k[i] > 0).unwrap();
            let mut km = k;
            km[i] -= 1;
            let mut acc = Complex64::new(0.0, 0.0);
            for j in 0..4 {
                if km[j] > 0 {
                    let mut kj = km;
                    kj[j] -= 1;
                    acc += a[(i, j)] * (km[j] as f64).sqrt() * out.table[out.idx(kj)];
                }
            }
            let v = acc / ((km[i] + 1) as f64).sqrt();
            let id = out.idx(k);
            out.table[id] = v;
        }
        out
    }
}

/// Heralded signal state `Tr_1[a_1 rho a_1^dagger] / <n_1>` on `|0>..|n_max>`
/// computed entirely in the Fock basis.
pub fn fock_oracle(cov: &TwoModeCovariance, n_max: usize, trigger_cutoff: usize) -> DMatrix<Complex64> {
    let g = GaussianFock::new(cov.matrix(), trigger_cutoff, n_max);
    let n_t = 0.25 * (cov.trigger_block().trace() - 2.0);
    DMatrix::from_fn(n_max + 1, n_max + 1, |m, n| {
        let mut s = Complex64::new(0.0, 0.0);
        for k in 0..trigger_cutoff {
            s += g.get(k + 1, m, k + 1, n) * (k + 1) as f64;
        }
        s / n_t
    })
}

fn rotation(phi: f64, mode: usize) -> Matrix4<f64> {
    let mut m = Matrix4::identity();
    let (s, c) = phi.sin_cos();
    let o = 2 * mode;
    m[(o, o)] = c;
    m[(o, o + 1)] = -s;
    m[(o + 1, o)] = s;
    m[(o + 1, o + 1)] = c;
    m
}

fn squeezer(r: f64, mode: usize) -> Matrix4<f64> {
    let mut m = Matrix4::identity();
    m[(2 * mode, 2 * mode)] = r.exp();
    m[(2 * mode + 1, 2 * mode + 1)] = (-r).exp();
    m
}

fn beam_splitter(theta: f64) -> Matrix4<f64> {
    let (s, c) = theta.sin_cos();
    let mut m = Matrix4::zeros();
    for q in 0..2 {
        m[(q, q)] = c;
        m[(q, q + 2)] = s;
        m[(q + 2, q)] = -s;
        m[(q + 2, q + 2)] = c;
    }
    m
}

/// Random physical two-mode covariance: thermal product state transformed
/// by a random symplectic (rotations, squeezers, beam splitter).
pub fn random_covariance<R: Rng>(rng: &mut R, max_squeeze: f64, max_thermal: f64) -> TwoModeCovariance {
    let a = 1.0 + rng.random::<f64>() * max_thermal;
    let b = 1.0 + rng.random::<f64>() * max_thermal;
    let thermal = Matrix4::from_diagonal(&nalgebra::Vector4::new(a, a, b, b));
    let mut s = Matrix4::identity();
    for mode in 0..2 {
        s = squeezer(rng.random_range(-max_squeeze..max_squeeze), mode) * s;
        s = rotation(rng.random_range(0.0..std::f64::consts::TAU), mode) * s;
    }
    s = beam_splitter(rng.random_range(0.0..std::f64::consts::PI)) * s;
    for mode in 0..2 {
        s = rotation(rng.random_range(0.0..std::f64::consts::TAU), mode) * s;
        s = squeezer(rng.random_range(-max_squeeze..max_squeeze), mode) * s;
    }
    TwoModeCovariance::new(s * thermal * s.transpose()).expect("symplectic transform of a thermal state")
}

/// Kolmogorov–Smirnov statistic and asymptotic p-value against `cdf`.
pub fn ks_test(samples: &[f64], cdf: impl Fn(f64) -> f64) -> (f64, f64) {
    let mut xs = samples.to_vec();
    xs.sort_by(f64::total_cmp);
    let n = xs.len() as f64;
    let mut d: f64 = 0.0;
    for (i, &x) in xs.iter().enumerate() {
        let f = cdf(x);
        d = d.max((i as f64 + 1.0) / n - f).max(f - i as f64 / n);
    }
    let lambda = (n.sqrt() + 0.12 + 0.11 / n.sqrt()) * d;
    let mut p = 0.0;
    for k in 1..200 {
        let kf = k as f64;
        let term = 2.0 * (-2.0 * kf * kf * lambda * lambda).exp();
        p += if k % 2 == 1 { term } else { -term };
        if term < 1e-16 {
            break;
        }
    }
    (d, p.clamp(0.0, 1.0))
}

pub fn max_abs_diff(a: &DMatrix<Complex64>, b: &DMatrix<Complex64>) -> f64 {
    (a - b).iter().map(|z| z.norm()).fold(0.0, f64::max)
}

/// [`fock_oracle`] with a fraction `dark` of heralds replaced by dark
/// counts, which leave the unconditioned signal state.
pub fn fock_oracle_with_dark(cov: &TwoModeCovariance, n_max: usize, trigger_cutoff: usize, dark: f64) -> DMatrix<Complex64> {
    let heralded = fock_oracle(cov, n_max, trigger_cutoff);
    if dark == 0.0 {
        return heralded;
    }
    let g = GaussianFock::new(cov.matrix(), trigger_cutoff, n_max);
    let uncond = DMatrix::from_fn(n_max + 1, n_max + 1, |m, n| {
        (0..=trigger_cutoff).map(|k| g.get(k, m, k, n)).sum::<Complex64>()
    });
    heralded * Complex64::new(1.0 - dark, 0.0) + uncond * Complex64::new(dark, 0.0)
}
