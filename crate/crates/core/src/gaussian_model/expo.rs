//! Closed-form integrals over piecewise exponential functions.
//!
//! Every analytic mode in this crate is a finite sum of pieces
//! `coef * exp(rate * (t - anchor))` supported on `[lo, hi]`, where an
//! infinite bound is only allowed on the side the piece decays towards.
//! Convolving such a piece with `exp(-r|tau|)` again yields pieces, so
//! double integrals `int int f(t) g(t') exp(-r|t-t'|)` reduce to sums of
//! elementary integrals.

#[derive(Debug, Clone, Copy, PartialEq)]
pub(crate) struct ExpPiece {
    pub coef: f64,
    pub rate: f64,
    pub anchor: f64,
    pub lo: f64,
    pub hi: f64,
}

impl ExpPiece {
    pub fn value(&self, t: f64) -> f64 {
        if t < self.lo || t > self.hi {
            0.0
        } else {
            self.coef * (self.rate * (t - self.anchor)).exp()
        }
    }

    fn scaled(self, f: f64) -> Self {
        ExpPiece {
            coef: self.coef * f,
            ..self
        }
    }
}

/// `int p(t) q(t) dt`.
pub(crate) fn product_integral(p: &ExpPiece, q: &ExpPiece) -> f64 {
    let lo = p.lo.max(q.lo);
    let hi = p.hi.min(q.hi);
    if !(lo < hi) {
        return 0.0;
    }
    let c = p.coef * q.coef;
    if c == 0.0 {
        return 0.0;
    }
    let lambda = p.rate + q.rate;
    let exponent = |t: f64| p.rate * (t - p.anchor) + q.rate * (t - q.anchor);
    match (lo.is_finite(), hi.is_finite()) {
        (true, true) => {
            let width = hi - lo;
            if lambda == 0.0 {
                c * exponent(lo).exp() * width
            } else if lambda > 0.0 {
                // anchored at the upper end to avoid overflow
                c * exponent(hi).exp() * (-(-lambda * width).exp_m1()) / lambda
            } else {
                c * exponent(lo).exp() * (lambda * width).exp_m1() / lambda
            }
        }
        (false, true) => {
            debug_assert!(lambda > 0.0, "divergent left tail");
            c * exponent(hi).exp() / lambda
        }
        (true, false) => {
            debug_assert!(lambda < 0.0, "divergent right tail");
            c * exponent(lo).exp() / (-lambda)
        }
        (false, false) => f64::NAN,
    }
}

/// `h(t) = int q(t') exp(-r |t - t'|) dt'` as a list of pieces.
///
/// Requires `q.rate != +-r`; callers handle that degeneracy.
pub(crate) fn convolve_two_sided(q: &ExpPiece, r: f64) -> Vec<ExpPiece> {
    let mut out = Vec::with_capacity(5);
    let lam = q.rate;
    if q.lo.is_finite() {
        let weight = ExpPiece {
            coef: 1.0,
            rate: -r,
            anchor: q.lo,
            lo: q.lo,
            hi: q.hi,
        };
        out.push(ExpPiece {
            coef: product_integral(q, &weight),
            rate: r,
            anchor: q.lo,
            lo: f64::NEG_INFINITY,
            hi: q.lo,
        });
    }
    if q.hi.is_finite() {
        let weight = ExpPiece {
            coef: 1.0,
            rate: r,
            anchor: q.hi,
            lo: q.lo,
            hi: q.hi,
        };
        out.push(ExpPiece {
            coef: product_integral(q, &weight),
            rate: -r,
            anchor: q.hi,
            lo: q.hi,
            hi: f64::INFINITY,
        });
    }
    // inside the support: split the integral at t
    out.push(ExpPiece {
        coef: q.coef * (1.0 / (lam + r) - 1.0 / (lam - r)),
        ..*q
    });
    if q.lo.is_finite() {
        out.push(ExpPiece {
            coef: -q.coef * (lam * (q.lo - q.anchor)).exp() / (lam + r),
            rate: -r,
            anchor: q.lo,
            lo: q.lo,
            hi: q.hi,
        });
    }
    if q.hi.is_finite() {
        out.push(ExpPiece {
            coef: q.coef * (lam * (q.hi - q.anchor)).exp() / (lam - r),
            rate: r,
            anchor: q.hi,
            lo: q.lo,
            hi: q.hi,
        });
    }
    out
}

fn exp_overlap_raw(f: &[ExpPiece], g: &[ExpPiece], r: f64) -> f64 {
    let mut total = 0.0;
    for q in g {
        for h in convolve_two_sided(q, r) {
            for p in f {
                total += product_integral(p, &h);
            }
        }
    }
    total
}

/// `int int f(t) g(t') exp(-r |t - t'|) dt dt'`.
pub(crate) fn exp_overlap(f: &[ExpPiece], g: &[ExpPiece], r: f64) -> f64 {
    let degenerate = g
        .iter()
        .any(|q| (q.rate - r).abs() <= 1e-7 * r || (q.rate + r).abs() <= 1e-7 * r);
    if degenerate {
        // symmetric nudge; the first-order error cancels
        let d = 1e-5;
        0.5 * (exp_overlap_raw(f, g, r * (1.0 + d)) + exp_overlap_raw(f, g, r * (1.0 - d)))
    } else {
        exp_overlap_raw(f, g, r)
    }
}

/// `int (sum_i f_i(t))^2 dt`.
pub(crate) fn norm_squared(f: &[ExpPiece]) -> f64 {
    let mut s = 0.0;
    for a in f {
        for b in f {
            s += product_integral(a, b);
        }
    }
    s
}

pub(crate) fn scale_all(f: &[ExpPiece], factor: f64) -> Vec<ExpPiece> {
    f.iter().map(|p| p.scaled(factor)).collect()
}
