//! Reference computations that share no code with the library.
#![allow(dead_code)]

use fdr_core::{CurveFamily, XGrid};
use nalgebra::{DMatrix, DVector};

/// `exp(M x)` from the Taylor series, after halving the argument until its
/// norm is below 1/2, then squaring back.
pub fn series_expm(m: &DMatrix<f64>, x: f64) -> DMatrix<f64> {
    let n = m.nrows();
    let mut a = m * x;
    let mut squarings = 0;
    while a.norm() > 0.5 {
        a /= 2.0;
        squarings += 1;
    }
    let mut sum = DMatrix::identity(n, n);
    let mut term = DMatrix::identity(n, n);
    for k in 1..60 {
        term = &term * &a / k as f64;
        sum += &term;
        if term.norm() < 1e-20 * sum.norm() {
            break;
        }
    }
    for _ in 0..squarings {
        sum = &sum * &sum;
    }
    sum
}

/// Adaptive Simpson with Richardson correction.
pub fn adaptive_simpson(f: &dyn Fn(f64) -> f64, a: f64, b: f64, tol: f64) -> f64 {
    fn simpson(fa: f64, fm: f64, fb: f64, a: f64, b: f64) -> f64 {
        (b - a) / 6.0 * (fa + 4.0 * fm + fb)
    }
    #[allow(clippy::too_many_arguments)]
    fn rec(f: &dyn Fn(f64) -> f64, a: f64, b: f64, fa: f64, fm: f64, fb: f64, whole: f64, tol: f64, depth: u32) -> f64 {
        let m = 0.5 * (a + b);
        let (lm, rm) = (0.5 * (a + m), 0.5 * (m + b));
        let (flm, frm) = (f(lm), f(rm));
        let left = simpson(fa, flm, fm, a, m);
        let right = simpson(fm, frm, fb, m, b);
        let delta = left + right - whole;
        if depth == 0 || delta.abs() <= 15.0 * tol {
            return left + right + delta / 15.0;
        }
        rec(f, a, m, fa, flm, fm, left, tol / 2.0, depth - 1) + rec(f, m, b, fm, frm, fb, right, tol / 2.0, depth - 1)
    }
    let (fa, fm, fb) = (f(a), f(0.5 * (a + b)), f(b));
    rec(f, a, b, fa, fm, fb, simpson(fa, fm, fb, a, b), tol, 50)
}

/// `erf` from Kummer's series `2t/sqrt(pi) e^{-t^2} sum (2t^2)^n / (2n+1)!!`,
/// which has only positive terms.
pub fn erf_series(t: f64) -> f64 {
    let t2 = t * t;
    let mut term = 1.0;
    let mut sum = 1.0;
    let mut n = 0.0;
    while term > 1e-18 * sum {
        n += 1.0;
        term *= 2.0 * t2 / (2.0 * n + 1.0);
        sum += term;
    }
    2.0 * t / std::f64::consts::PI.sqrt() * (-t2).exp() * sum
}

/// Standard normal distribution function via [`erf_series`], switching to
/// Laplace's continued fraction `phi(t) / (t + 1/(t + 2/(t + ...)))` in the
/// left tail where `1/2 - erf/2` would cancel.
pub fn phi_series(z: f64) -> f64 {
    if z < -1.0 {
        let t = -z;
        let mut frac = t;
        for k in (1..400).rev() {
            frac = t + k as f64 / frac;
        }
        return (-0.5 * t * t).exp() / (2.0 * std::f64::consts::PI).sqrt() / frac;
    }
    let e = erf_series(z.abs() / std::f64::consts::SQRT_2);
    if z >= 0.0 {
        0.5 + 0.5 * e
    } else {
        0.5 - 0.5 * e
    }
}

/// Residual rms of the one-factor drift condition at a fixed `b`, written
/// out from the definition.
pub fn rn_rms_1d(m: &dyn CurveFamily, y: f64, sigma: f64, b: f64, grid: &XGrid) -> f64 {
    let ss: f64 = grid
        .nodes()
        .iter()
        .map(|&x| {
            let r = m.dx(x, &[y]) - m.grad_y(x, &[y])[0] * b - 0.5 * sigma * sigma * m.hess_y(x, &[y])[(0, 0)];
            r * r
        })
        .sum();
    (ss / grid.len() as f64).sqrt()
}

/// Smallest [`rn_rms_1d`] over `b` on a uniform scan of `[lo, hi]`, refined
/// twice around the best point. Returns `(b, rms)`.
pub fn scan_min_rms_1d(m: &dyn CurveFamily, y: f64, sigma: f64, grid: &XGrid, lo: f64, hi: f64) -> (f64, f64) {
    let (mut lo, mut hi) = (lo, hi);
    let mut best = (f64::NAN, f64::INFINITY);
    for _ in 0..3 {
        let n = 2001;
        for k in 0..n {
            let b = lo + (hi - lo) * k as f64 / (n - 1) as f64;
            let r = rn_rms_1d(m, y, sigma, b, grid);
            if r < best.1 {
                best = (b, r);
            }
        }
        let w = (hi - lo) / (n - 1) as f64;
        lo = best.0 - 2.0 * w;
        hi = best.0 + 2.0 * w;
    }
    best
}

/// Random `P D P^{-1}` with eigenvalues `eig` and `P = I + scale * noise`.
pub fn with_spectrum(eig: &[f64], noise: &[f64], scale: f64) -> DMatrix<f64> {
    let n = eig.len();
    let p = DMatrix::identity(n, n) + DMatrix::from_fn(n, n, |i, j| scale * noise[(i * n + j) % noise.len()]);
    let p_inv = p.clone().try_inverse().expect("perturbation of identity is invertible");
    &p * DMatrix::from_diagonal(&DVector::from_column_slice(eig)) * p_inv
}
