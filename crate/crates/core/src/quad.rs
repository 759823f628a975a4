//! Adaptive numerical integration.
//!
//! Adaptive Simpson quadrature over finite intervals, with substitutions for
//! half-infinite ranges and a nested rule for rectangles. These back the
//! special-function evaluations and the slower "ground truth" routes used to
//! cross-check closed forms; performance-critical inner loops use fixed-order
//! rules instead.

use crate::error::{Error, Result};

/// Integrate `f` over `[a, b]` until the local error estimate drops below
/// `max(abs_tol, rel_tol * |integral|)`.
pub fn integrate<F: Fn(f64) -> f64>(
    f: F,
    a: f64,
    b: f64,
    abs_tol: f64,
    rel_tol: f64,
) -> Result<f64> {
    if !(a.is_finite() && b.is_finite()) {
        return Err(Error::invalid("integration limits must be finite"));
    }
    if a == b {
        return Ok(0.0);
    }
    let eval = |x: f64| -> Result<f64> {
        let y = f(x);
        if y.is_nan() {
            return Err(Error::domain(format!("integrand is NaN at x = {x}")));
        }
        Ok(y)
    };
    let m = 0.5 * (a + b);
    let (fa, fm, fb) = (eval(a)?, eval(m)?, eval(b)?);
    let whole = simpson(a, b, fa, fm, fb);
    // A first pass fixes the scale for the relative tolerance; a second pass
    // tightens it if the initial estimate was far off.
    let mut scale = whole.abs();
    for _ in 0..2 {
        let tol = abs_tol.max(rel_tol * scale);
        let v = adaptive(&eval, a, b, fa, fm, fb, whole, tol, MAX_DEPTH)?;
        if (v.abs() - scale).abs() <= 0.5 * scale.max(abs_tol) {
            return Ok(v);
        }
        scale = v.abs();
    }
    let tol = abs_tol.max(rel_tol * scale);
    adaptive(&eval, a, b, fa, fm, fb, whole, tol, MAX_DEPTH)
}

/// Integrate `f` over `[a, +inf)`.
///
/// Maps the tail onto `(0, 1]` with `x = a + t/(1-t)`; the integrand must
/// decay fast enough that `f(x) / (1-t)^2 -> 0` as `t -> 1`.
pub fn integrate_to_inf<F: Fn(f64) -> f64>(
    f: F,
    a: f64,
    abs_tol: f64,
    rel_tol: f64,
) -> Result<f64> {
    let g = |t: f64| {
        if t >= 1.0 {
            return 0.0;
        }
        let om = 1.0 - t;
        let x = a + t / om;
        let y = f(x) / (om * om);
        if y.is_finite() { y } else { 0.0 }
    };
    integrate(g, 0.0, 1.0, abs_tol, rel_tol)
}

/// Integrate `f(x, y)` over the rectangle `[ax, bx] x [ay, by]`.
///
/// Nested adaptive Simpson; the inner tolerance is scaled down so the inner
/// errors do not dominate the outer estimate.
pub fn integrate_2d<F: Fn(f64, f64) -> f64>(
    f: F,
    (ax, bx): (f64, f64),
    (ay, by): (f64, f64),
    abs_tol: f64,
    rel_tol: f64,
) -> Result<f64> {
    let inner_abs = abs_tol / (10.0 * (bx - ax).abs().max(1.0));
    let outer = |x: f64| {
        integrate(|y| f(x, y), ay, by, inner_abs, rel_tol / 10.0).unwrap_or(f64::NAN)
    };
    integrate(outer, ax, bx, abs_tol, rel_tol)
}

const MAX_DEPTH: u32 = 48;

fn simpson(a: f64, b: f64, fa: f64, fm: f64, fb: f64) -> f64 {
    (b - a) / 6.0 * (fa + 4.0 * fm + fb)
}

#[allow(clippy::too_many_arguments)]
fn adaptive<F: Fn(f64) -> Result<f64>>(
    f: &F,
    a: f64,
    b: f64,
    fa: f64,
    fm: f64,
    fb: f64,
    whole: f64,
    tol: f64,
    depth: u32,
) -> Result<f64> {
    let m = 0.5 * (a + b);
    let lm = 0.5 * (a + m);
    let rm = 0.5 * (m + b);
    let (flm, frm) = (f(lm)?, f(rm)?);
    let left = simpson(a, m, fa, flm, fm);
    let right = simpson(m, b, fm, frm, fb);
    let delta = left + right - whole;
    // Requested tolerances halve with each split; below the floating-point
    // resolution of the local partial sums no further subdivision can help,
    // so the effective tolerance is floored there.
    let tol = tol.max(f64::EPSILON * (left.abs() + right.abs()));
    if depth == 0 {
        if delta.abs() > 15.0 * tol {
            return Err(Error::NoConvergence(format!(
                "adaptive quadrature hit max depth on [{a}, {b}] (error estimate {:e}, tolerance {:e})",
                delta.abs() / 15.0,
                tol
            )));
        }
        return Ok(left + right + delta / 15.0);
    }
    if delta.abs() <= 15.0 * tol {
        return Ok(left + right + delta / 15.0);
    }
    let half = 0.5 * tol;
    Ok(adaptive(f, a, m, fa, flm, fm, left, half, depth - 1)?
        + adaptive(f, m, b, fm, frm, fb, right, half, depth - 1)?)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use std::f64::consts::PI;

    #[test]
    fn polynomial_is_exact() {
        let v = integrate(|x| 3.0 * x * x, 0.0, 2.0, 1e-12, 1e-12).unwrap();
        assert_relative_eq!(v, 8.0, max_relative = 1e-12);
    }

    #[test]
    fn oscillatory_integrand() {
        // int_0^{2pi} sin^2 = pi
        let v = integrate(|x| x.sin().powi(2), 0.0, 2.0 * PI, 1e-12, 1e-12).unwrap();
        assert_relative_eq!(v, PI, max_relative = 1e-10);
    }

    #[test]
    fn gaussian_tail_to_infinity() {
        let v = integrate_to_inf(|x| (-0.5 * x * x).exp(), 0.0, 1e-12, 1e-12).unwrap();
        assert_relative_eq!(v, (PI / 2.0).sqrt(), max_relative = 1e-10);
    }

    #[test]
    fn exponential_decay_from_offset() {
        let v = integrate_to_inf(|x| (-x).exp(), 1.0, 1e-13, 1e-13).unwrap();
        assert_relative_eq!(v, (-1.0f64).exp(), max_relative = 1e-10);
    }

    #[test]
    fn rectangle_rule() {
        // int int exp(-x - y) over [0,1]^2 = (1 - e^-1)^2
        let v = integrate_2d(|x, y| (-x - y).exp(), (0.0, 1.0), (0.0, 1.0), 1e-10, 1e-10)
            .unwrap();
        let expect = (1.0 - (-1.0f64).exp()).powi(2);
        assert_relative_eq!(v, expect, max_relative = 1e-8);
    }

    #[test]
    fn nan_integrand_is_an_error() {
        let r = integrate(|x| (x - 0.5).ln(), 0.0, 1.0, 1e-8, 1e-8);
        assert!(r.is_err());
    }
}
