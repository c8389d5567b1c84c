//! One-dimensional quadrature and normal-distribution helpers.

use statrs::distribution::{Continuous, ContinuousCDF, Normal};

/// `∫ₐᵇ f` by double-exponential quadrature to absolute tolerance `tol`.
pub fn integrate<F: Fn(f64) -> f64>(f: F, a: f64, b: f64, tol: f64) -> f64 {
    if a == b {
        return 0.0;
    }
    quadrature::double_exponential::integrate(f, a, b, tol).integral
}

/// Integrates `f` against the density of `N(mean, sd²)` over ±12 sd.
pub fn gaussian_expectation<F: Fn(f64) -> f64>(f: F, mean: f64, sd: f64, tol: f64) -> f64 {
    let w = 12.0 * sd;
    integrate(|x| f(x) * normal_pdf(x, mean, sd), mean - w, mean + w, tol)
}

pub fn normal_pdf(x: f64, mean: f64, sd: f64) -> f64 {
    Normal::new(mean, sd).expect("positive sd").pdf(x)
}

pub fn normal_cdf(x: f64, mean: f64, sd: f64) -> f64 {
    Normal::new(mean, sd).expect("positive sd").cdf(x)
}

/// Minimizes a convex function on `[lo, hi]` by golden-section search.
pub fn golden_min<F: Fn(f64) -> f64>(f: F, mut lo: f64, mut hi: f64, tol: f64) -> (f64, f64) {
    let r = 0.5 * (5f64.sqrt() - 1.0);
    let mut c = hi - r * (hi - lo);
    let mut d = lo + r * (hi - lo);
    let (mut fc, mut fd) = (f(c), f(d));
    while hi - lo > tol {
        if fc <= fd {
            hi = d;
            d = c;
            fd = fc;
            c = hi - r * (hi - lo);
            fc = f(c);
        } else {
            lo = c;
            c = d;
            fc = fd;
            d = lo + r * (hi - lo);
            fd = f(d);
        }
    }
    let x = 0.5 * (lo + hi);
    (x, f(x))
}
