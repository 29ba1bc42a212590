//! Independent oracles shared by the integration tests. Nothing here calls
//! into the library's numerics.
#![allow(dead_code)]

use std::f64::consts::PI;

/// Adaptive Simpson quadrature of `f` over `[a, b]` to absolute tolerance `tol`.
pub fn simpson<F: Fn(f64) -> f64>(f: &F, a: f64, b: f64, tol: f64) -> f64 {
    let m = 0.5 * (a + b);
    let (fa, fm, fb) = (f(a), f(m), f(b));
    let whole = (b - a) / 6.0 * (fa + 4.0 * fm + fb);
    simpson_rec(f, a, b, fa, fm, fb, whole, tol, 60)
}

#[allow(clippy::too_many_arguments)]
fn simpson_rec<F: Fn(f64) -> f64>(
    f: &F,
    a: f64,
    b: f64,
    fa: f64,
    fm: f64,
    fb: f64,
    whole: f64,
    tol: f64,
    depth: u32,
) -> f64 {
    let m = 0.5 * (a + b);
    let (lm, rm) = (0.5 * (a + m), 0.5 * (m + b));
    let (flm, frm) = (f(lm), f(rm));
    let left = (m - a) / 6.0 * (fa + 4.0 * flm + fm);
    let right = (b - m) / 6.0 * (fm + 4.0 * frm + fb);
    let delta = left + right - whole;
    if depth == 0 || delta.abs() <= 15.0 * tol {
        return left + right + delta / 15.0;
    }
    simpson_rec(f, a, m, fa, flm, fm, left, 0.5 * tol, depth - 1)
        + simpson_rec(f, m, b, fm, frm, fb, right, 0.5 * tol, depth - 1)
}

pub fn laplace_pdf(y: f64, mu: f64, b: f64) -> f64 {
    (-(y - mu).abs() / b).exp() / (2.0 * b)
}

pub fn normal_pdf(y: f64, mu: f64, var: f64) -> f64 {
    (-(y - mu) * (y - mu) / (2.0 * var)).exp() / (2.0 * PI * var).sqrt()
}

pub fn laplace_cdf(y: f64, mu: f64, b: f64) -> f64 {
    if y < mu {
        0.5 * ((y - mu) / b).exp()
    } else {
        1.0 - 0.5 * (-(y - mu) / b).exp()
    }
}

pub fn normal_cdf(y: f64, mu: f64, var: f64) -> f64 {
    0.5 * libm::erfc(-(y - mu) / (2.0 * var).sqrt())
}

/// Mixture density written out directly from its definition.
pub fn mixture_pdf(y: f64, l1: f64, mu1: f64, s1: f64, mu2: f64, v2: f64) -> f64 {
    l1 * laplace_pdf(y, mu1, s1) + (1.0 - l1) * normal_pdf(y, mu2, v2)
}

/// Chi-square density with `k` degrees of freedom.
pub fn chi2_pdf(t: f64, k: f64) -> f64 {
    if t <= 0.0 {
        return 0.0;
    }
    ((0.5 * k - 1.0) * t.ln() - 0.5 * t - 0.5 * k * 2f64.ln() - libm::lgamma(0.5 * k)).exp()
}

/// Upper tail of the chi-square distribution by quadrature of its density.
pub fn chi2_sf_quadrature(x: f64, k: f64) -> f64 {
    let mut total = 0.0;
    let mut a = x;
    // Integrate in unit-width pieces until the density is negligible.
    while a < x + 400.0 {
        let piece = simpson(&|t| chi2_pdf(t, k), a, a + 1.0, 1e-15);
        total += piece;
        if a > x + 10.0 && piece < 1e-18 {
            break;
        }
        a += 1.0;
    }
    total
}
