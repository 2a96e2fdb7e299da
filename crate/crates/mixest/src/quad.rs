//! Adaptive Simpson quadrature.
//!
//! Small and allocation-free; enough for the partial-mean and
//! product-moment integrals this crate needs. The real line is handled by
//! the `atanh` change of variables in [`integrate_real_line`].

use crate::{Error, Result};

const MAX_DEPTH: u32 = 48;

/// Integrate `f` over `[a, b]` to absolute tolerance `tol`.
///
/// Classic recursive Simpson bisection with Richardson extrapolation;
/// errors out if the recursion depth is exhausted before the local error
/// estimate drops under the budgeted share of `tol`.
pub fn adaptive_simpson<F: Fn(f64) -> f64>(f: &F, a: f64, b: f64, tol: f64) -> Result<f64> {
    if a == b {
        return Ok(0.0);
    }
    let m = 0.5 * (a + b);
    let (fa, fm, fb) = (f(a), f(m), f(b));
    let whole = simpson_panel(a, b, fa, fm, fb);
    step(f, a, b, fa, fm, fb, whole, tol, MAX_DEPTH, true)
}

/// Like [`adaptive_simpson`] but never fails: on depth exhaustion the best
/// available estimate is kept. Used where the caller knows the integrand is
/// benign and a hair of extra error is acceptable.
pub fn adaptive_simpson_best<F: Fn(f64) -> f64>(f: &F, a: f64, b: f64) -> f64 {
    if a == b {
        return 0.0;
    }
    let m = 0.5 * (a + b);
    let (fa, fm, fb) = (f(a), f(m), f(b));
    let whole = simpson_panel(a, b, fa, fm, fb);
    step(f, a, b, fa, fm, fb, whole, 1e-13, MAX_DEPTH, false).expect("infallible mode cannot error")
}

fn simpson_panel(a: f64, b: f64, fa: f64, fm: f64, fb: f64) -> f64 {
    (b - a) / 6.0 * (fa + 4.0 * fm + fb)
}

#[allow(clippy::too_many_arguments)]
fn step<F: Fn(f64) -> f64>(
    f: &F,
    a: f64,
    b: f64,
    fa: f64,
    fm: f64,
    fb: f64,
    whole: f64,
    tol: f64,
    depth: u32,
    strict: bool,
) -> Result<f64> {
    let m = 0.5 * (a + b);
    let lm = 0.5 * (a + m);
    let rm = 0.5 * (m + b);
    let (flm, frm) = (f(lm), f(rm));
    let left = simpson_panel(a, m, fa, flm, fm);
    let right = simpson_panel(m, b, fm, frm, fb);
    let err = left + right - whole;
    if err.abs() <= 15.0 * tol || (b - a).abs() < f64::EPSILON * (a.abs() + b.abs()) {
        return Ok(left + right + err / 15.0);
    }
    if depth == 0 {
        if strict {
            return Err(Error::QuadratureFailure {
                estimate: left + right + err / 15.0,
                error: err.abs() / 15.0,
            });
        }
        return Ok(left + right + err / 15.0);
    }
    let half_tol = 0.5 * tol;
    let l = step(f, a, m, fa, flm, fm, left, half_tol, depth - 1, strict)?;
    let r = step(f, m, b, fm, frm, fb, right, half_tol, depth - 1, strict)?;
    Ok(l + r)
}

/// Integrate `f` over the whole real line to absolute tolerance `tol`.
///
/// Uses `x = center + scale * atanh(u)` with `u` on `(-1, 1)`; `scale`
/// must be large enough that `f` decays faster than `exp(-2|x|/scale)` in
/// both tails, which holds for all density products in this crate when
/// `scale` is the sum of the component scales.
pub fn integrate_real_line<F: Fn(f64) -> f64>(
    f: &F,
    center: f64,
    scale: f64,
    tol: f64,
) -> Result<f64> {
    let g = |u: f64| {
        if u.abs() >= 1.0 {
            return 0.0;
        }
        let x = center + scale * u.atanh();
        let v = f(x);
        if v == 0.0 || !v.is_finite() {
            return 0.0;
        }
        v * scale / (1.0 - u * u)
    };
    adaptive_simpson(&g, -1.0, 1.0, tol)
}
