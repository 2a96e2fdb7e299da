//! Dense BFGS with a strong-Wolfe line search.
//!
//! The problems in this crate are tiny (at most a few dozen variables), so
//! the full inverse-Hessian approximation is kept and updated directly.
//! Line search follows the classic bracket-then-zoom scheme with
//! `c1 = 1e-4`, `c2 = 0.9`.

const C1: f64 = 1e-4;
const C2: f64 = 0.9;
const ALPHA_MAX: f64 = 1e6;

/// Outcome of a minimization run.
#[derive(Debug, Clone)]
pub struct OptResult {
    pub x: Vec<f64>,
    pub value: f64,
    pub grad_inf_norm: f64,
    pub iterations: usize,
    /// Gradient infinity norm dropped under the tolerance.
    pub converged: bool,
    /// Objective value at the start point and after each accepted step.
    pub trace: Vec<f64>,
}

/// Minimize `f` from `x0`. The closure returns the objective value and
/// writes the gradient; non-finite values are treated as infinite (the
/// line search backs away from them).
pub fn minimize<F>(mut f: F, x0: &[f64], max_iter: usize, grad_tol: f64) -> OptResult
where
    F: FnMut(&[f64], &mut [f64]) -> f64,
{
    let d = x0.len();
    let mut x = x0.to_vec();
    let mut grad = vec![0.0; d];
    let mut fx = sanitize(f(&x, &mut grad));
    let mut trace = vec![fx];

    let mut h = identity(d);
    let mut h_is_identity = true;
    let mut first_update = true;

    let mut iterations = 0;
    let mut converged = inf_norm(&grad) < grad_tol;

    while !converged && iterations < max_iter && fx.is_finite() {
        let mut p = neg_mat_vec(&h, &grad);
        let mut dphi0 = dot(&grad, &p);
        if !dphi0.is_finite() || dphi0 >= 0.0 {
            // Direction lost descent; fall back to steepest descent.
            h = identity(d);
            h_is_identity = true;
            first_update = true;
            p = grad.iter().map(|g| -g).collect();
            dphi0 = dot(&grad, &p);
            if dphi0 >= 0.0 {
                break;
            }
        }

        let mut new_grad = vec![0.0; d];
        let search = line_search(
            |alpha, g_out: &mut [f64]| {
                let xt: Vec<f64> = x.iter().zip(&p).map(|(xi, pi)| xi + alpha * pi).collect();
                sanitize(f(&xt, g_out))
            },
            fx,
            dphi0,
            &p,
            &mut new_grad,
        );

        let (alpha, phi_alpha) = match search {
            Some(pair) => pair,
            None => {
                if h_is_identity {
                    break;
                }
                // Retry the iteration with a fresh Hessian approximation.
                h = identity(d);
                h_is_identity = true;
                first_update = true;
                continue;
            }
        };

        let s: Vec<f64> = p.iter().map(|pi| alpha * pi).collect();
        let y: Vec<f64> = new_grad.iter().zip(&grad).map(|(n, o)| n - o).collect();
        for i in 0..d {
            x[i] += s[i];
        }
        fx = phi_alpha;
        grad.copy_from_slice(&new_grad);
        trace.push(fx);
        iterations += 1;

        let sy = dot(&s, &y);
        if sy > 1e-12 * norm(&s) * norm(&y) {
            if first_update {
                let yy = dot(&y, &y);
                if yy > 0.0 {
                    scale_identity(&mut h, sy / yy);
                }
                first_update = false;
            }
            bfgs_update(&mut h, &s, &y, sy);
            h_is_identity = false;
        }

        converged = inf_norm(&grad) < grad_tol;
    }

    OptResult {
        grad_inf_norm: inf_norm(&grad),
        value: fx,
        x,
        iterations,
        converged,
        trace,
    }
}

fn sanitize(v: f64) -> f64 {
    if v.is_nan() {
        f64::INFINITY
    } else {
        v
    }
}

/// Strong-Wolfe line search (bracket + zoom). `phi` evaluates the
/// objective at `x + alpha p` and writes the gradient there; on success
/// returns the accepted step with its objective value and leaves that
/// point's gradient in `grad_out`.
fn line_search<P>(
    mut phi: P,
    phi0: f64,
    dphi0: f64,
    p: &[f64],
    grad_out: &mut [f64],
) -> Option<(f64, f64)>
where
    P: FnMut(f64, &mut [f64]) -> f64,
{
    let mut alpha_prev = 0.0;
    let mut phi_prev = phi0;
    let mut alpha = 1.0;
    let mut g = vec![0.0; p.len()];

    for iter in 0..25 {
        let phi_a = phi(alpha, &mut g);
        if phi_a > phi0 + C1 * alpha * dphi0 || (iter > 0 && phi_a >= phi_prev) {
            return zoom(
                &mut phi, phi0, dphi0, alpha_prev, phi_prev, alpha, p, grad_out,
            );
        }
        let dphi_a = dot(&g, p);
        if dphi_a.abs() <= -C2 * dphi0 {
            grad_out.copy_from_slice(&g);
            return Some((alpha, phi_a));
        }
        if dphi_a >= 0.0 {
            return zoom(&mut phi, phi0, dphi0, alpha, phi_a, alpha_prev, p, grad_out);
        }
        alpha_prev = alpha;
        phi_prev = phi_a;
        alpha = (2.0 * alpha).min(ALPHA_MAX);
        if alpha >= ALPHA_MAX {
            grad_out.copy_from_slice(&g);
            return Some((alpha_prev.max(f64::MIN_POSITIVE), phi_prev));
        }
    }
    None
}

/// Zoom phase: shrink `[alpha_lo, alpha_hi]` around a Wolfe point.
#[allow(clippy::too_many_arguments)]
fn zoom<P>(
    phi: &mut P,
    phi0: f64,
    dphi0: f64,
    mut alpha_lo: f64,
    mut phi_lo: f64,
    mut alpha_hi: f64,
    p: &[f64],
    grad_out: &mut [f64],
) -> Option<(f64, f64)>
where
    P: FnMut(f64, &mut [f64]) -> f64,
{
    let mut g = vec![0.0; p.len()];
    for _ in 0..40 {
        let alpha = 0.5 * (alpha_lo + alpha_hi);
        if (alpha_hi - alpha_lo).abs() < 1e-16 * alpha.abs().max(1.0) {
            break;
        }
        let phi_a = phi(alpha, &mut g);
        if phi_a > phi0 + C1 * alpha * dphi0 || phi_a >= phi_lo {
            alpha_hi = alpha;
        } else {
            let dphi_a = dot(&g, p);
            if dphi_a.abs() <= -C2 * dphi0 {
                grad_out.copy_from_slice(&g);
                return Some((alpha, phi_a));
            }
            if dphi_a * (alpha_hi - alpha_lo) >= 0.0 {
                alpha_hi = alpha_lo;
            }
            alpha_lo = alpha;
            phi_lo = phi_a;
        }
    }
    // No strict Wolfe point pinned down; accept the best sufficient-decrease
    // point if one was found.
    if alpha_lo > 0.0 && phi_lo < phi0 {
        let v = phi(alpha_lo, &mut g);
        if v.is_finite() {
            grad_out.copy_from_slice(&g);
            return Some((alpha_lo, v));
        }
    }
    None
}

fn identity(d: usize) -> Vec<f64> {
    let mut m = vec![0.0; d * d];
    for i in 0..d {
        m[i * d + i] = 1.0;
    }
    m
}

fn scale_identity(h: &mut [f64], c: f64) {
    for v in h.iter_mut() {
        *v *= c;
    }
}

/// `H <- (I - rho s y') H (I - rho y s') + rho s s'`.
fn bfgs_update(h: &mut Vec<f64>, s: &[f64], y: &[f64], sy: f64) {
    let d = s.len();
    let rho = 1.0 / sy;
    let hy = mat_vec(h, y);
    let yhy = dot(y, &hy);
    let mut new_h = vec![0.0; d * d];
    for i in 0..d {
        for j in 0..d {
            new_h[i * d + j] = h[i * d + j] - rho * (s[i] * hy[j] + hy[i] * s[j])
                + rho * rho * yhy * s[i] * s[j]
                + rho * s[i] * s[j];
        }
    }
    *h = new_h;
}

fn mat_vec(m: &[f64], v: &[f64]) -> Vec<f64> {
    let d = v.len();
    (0..d).map(|i| dot(&m[i * d..(i + 1) * d], v)).collect()
}

fn neg_mat_vec(m: &[f64], v: &[f64]) -> Vec<f64> {
    mat_vec(m, v).into_iter().map(|x| -x).collect()
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn norm(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}

fn inf_norm(a: &[f64]) -> f64 {
    a.iter().fold(0.0, |m, v| m.max(v.abs()))
}
