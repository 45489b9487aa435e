//! One-dimensional quadrature rules shared by the energy and profile code.

use crate::error::{Error, Result};

/// Gauss-Legendre nodes and weights of order 8, mapped to `[0, 1]`.
pub const GAUSS_LEGENDRE_8: [(f64, f64); 8] = {
    const X: [f64; 4] = [
        0.183_434_642_495_649_8,
        0.525_532_409_916_329,
        0.796_666_477_413_626_7,
        0.960_289_856_497_536_3,
    ];
    const W: [f64; 4] = [
        0.362_683_783_378_362,
        0.313_706_645_877_887_3,
        0.222_381_034_453_374_5,
        0.101_228_536_290_376_3,
    ];
    [
        (0.5 - 0.5 * X[3], 0.5 * W[3]),
        (0.5 - 0.5 * X[2], 0.5 * W[2]),
        (0.5 - 0.5 * X[1], 0.5 * W[1]),
        (0.5 - 0.5 * X[0], 0.5 * W[0]),
        (0.5 + 0.5 * X[0], 0.5 * W[0]),
        (0.5 + 0.5 * X[1], 0.5 * W[1]),
        (0.5 + 0.5 * X[2], 0.5 * W[2]),
        (0.5 + 0.5 * X[3], 0.5 * W[3]),
    ]
};

/// Integrates `f` over `[a, b]` with the order-8 Gauss-Legendre rule.
pub fn gauss_legendre(f: impl Fn(f64) -> f64, a: f64, b: f64) -> f64 {
    let h = b - a;
    GAUSS_LEGENDRE_8
        .iter()
        .map(|&(t, wt)| wt * f(a + h * t))
        .sum::<f64>()
        * h
}

const MAX_DEPTH: u32 = 48;

/// Adaptive Simpson quadrature with Richardson correction.
///
/// `tol` is an absolute tolerance on the whole interval; it is halved at
/// every bisection. Fails when the recursion depth limit is hit before the
/// local error estimate drops below its share of the tolerance.
pub fn adaptive_simpson(f: impl Fn(f64) -> f64, a: f64, b: f64, tol: f64) -> Result<f64> {
    if a == b {
        return Ok(0.0);
    }
    let fa = f(a);
    let fb = f(b);
    let m = 0.5 * (a + b);
    let fm = f(m);
    let whole = (b - a) / 6.0 * (fa + 4.0 * fm + fb);
    simpson_step(&f, a, b, fa, fm, fb, whole, tol, MAX_DEPTH)
        .ok_or(Error::Quadrature { a, b, tol })
}

#[allow(clippy::too_many_arguments)]
fn simpson_step(
    f: &impl Fn(f64) -> f64,
    a: f64,
    b: f64,
    fa: f64,
    fm: f64,
    fb: f64,
    whole: f64,
    tol: f64,
    depth: u32,
) -> Option<f64> {
    let m = 0.5 * (a + b);
    let lm = 0.5 * (a + m);
    let rm = 0.5 * (m + b);
    let flm = f(lm);
    let frm = f(rm);
    let left = (m - a) / 6.0 * (fa + 4.0 * flm + fm);
    let right = (b - m) / 6.0 * (fm + 4.0 * frm + fb);
    let delta = left + right - whole;
    if !delta.is_finite() {
        return None;
    }
    if delta.abs() <= 15.0 * tol {
        return Some(left + right + delta / 15.0);
    }
    if depth == 0 {
        return None;
    }
    let l = simpson_step(f, a, m, fa, flm, fm, left, 0.5 * tol, depth - 1)?;
    let r = simpson_step(f, m, b, fm, frm, fb, right, 0.5 * tol, depth - 1)?;
    Some(l + r)
}

/// Composite Simpson rule with `panels` (rounded up to even) subintervals.
pub fn composite_simpson(f: impl Fn(f64) -> f64, a: f64, b: f64, panels: usize) -> f64 {
    let n = panels.max(2) + panels % 2;
    let h = (b - a) / n as f64;
    let mut acc = f(a) + f(b);
    for k in 1..n {
        let x = a + h * k as f64;
        acc += if k % 2 == 1 { 4.0 } else { 2.0 } * f(x);
    }
    acc * h / 3.0
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn gauss_legendre_is_exact_for_degree_15() {
        let f = |x: f64| x.powi(15) - 3.0 * x.powi(7) + 1.0;
        let exact = 1.0 / 16.0 - 3.0 / 8.0 + 1.0;
        assert!((gauss_legendre(f, 0.0, 1.0) - exact).abs() < 1e-14);
        let weights: f64 = GAUSS_LEGENDRE_8.iter().map(|p| p.1).sum();
        assert!((weights - 1.0).abs() < 1e-15);
    }

    #[test]
    fn adaptive_simpson_handles_kinks() {
        let v = adaptive_simpson(|x: f64| x.abs(), -1.0, 2.0, 1e-12).unwrap();
        assert!((v - 2.5).abs() < 1e-11);
        let s = adaptive_simpson(f64::sin, 0.0, std::f64::consts::PI, 1e-12).unwrap();
        assert!((s - 2.0).abs() < 1e-11);
    }

    #[test]
    fn adaptive_simpson_reports_failure() {
        let err = adaptive_simpson(|x: f64| 1.0 / x, 0.0, 1.0, 1e-10);
        assert!(matches!(err, Err(Error::Quadrature { .. })));
    }

    #[test]
    fn composite_simpson_matches_polynomial() {
        let v = composite_simpson(|x| x * x * x, 0.0, 2.0, 10);
        assert!((v - 4.0).abs() < 1e-12);
    }
}
