//! Polak–Ribière+ nonlinear conjugate gradient with Armijo backtracking.

use crate::error::{Error, Result};

/// Smallest step tried before the line search gives up.
pub const MIN_STEP: f64 = 1e-16;

/// Multiplier on the slope-matched initial step. Overshooting lets the
/// interpolating backtrack land near the line minimum instead of accepting
/// the same short step forever.
pub const STEP_GROWTH: f64 = 4.0;

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct NcgOptions {
    pub max_iters: usize,
    pub grad_tol: f64,
    pub armijo_c1: f64,
    pub backtrack_factor: f64,
}

impl Default for NcgOptions {
    fn default() -> Self {
        Self {
            max_iters: 1000,
            grad_tol: 1e-5,
            armijo_c1: 1e-4,
            backtrack_factor: 0.5,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum NcgStatus {
    Converged,
    MaxIterations,
    /// The line search could not find an acceptable step above [`MIN_STEP`].
    Stalled,
}

#[derive(Clone, Debug, PartialEq)]
pub struct NcgResult {
    pub x: Vec<f64>,
    pub value: f64,
    pub grad_norm: f64,
    pub iterations: usize,
    pub evaluations: usize,
    pub status: NcgStatus,
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn norm(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}

/// Minimizes `f`, which returns the value and gradient at a point.
///
/// Non-finite trial values halve the step. Directions restart to steepest
/// descent every `n` iterations and whenever the conjugate direction is not a
/// descent direction.
pub fn ncg_minimize<F>(mut f: F, x0: &[f64], opts: &NcgOptions) -> Result<NcgResult>
where
    F: FnMut(&[f64]) -> (f64, Vec<f64>),
{
    if !(opts.grad_tol > 0.0) || !(opts.armijo_c1 > 0.0 && opts.armijo_c1 < 0.5) {
        return Err(Error::invalid("ncg needs grad_tol > 0 and 0 < c1 < 0.5"));
    }
    if !(opts.backtrack_factor > 0.0 && opts.backtrack_factor < 1.0) {
        return Err(Error::invalid("backtrack factor must lie in (0, 1)"));
    }
    let n = x0.len();
    let mut x = x0.to_vec();
    let (mut fx, mut g) = f(&x);
    let mut evaluations = 1;
    if !fx.is_finite() || g.iter().any(|v| !v.is_finite()) {
        return Err(Error::invalid("objective is not finite at the starting point"));
    }
    let mut d: Vec<f64> = g.iter().map(|v| -v).collect();
    let mut since_restart = 0;
    let mut prev: Option<(f64, f64)> = None;
    let mut xn = vec![0.0; n];
    let mut status = NcgStatus::MaxIterations;
    let mut iterations = 0;

    while iterations < opts.max_iters {
        let gnorm = norm(&g);
        if gnorm <= opts.grad_tol {
            status = NcgStatus::Converged;
            break;
        }
        let mut slope = dot(&g, &d);
        if slope >= 0.0 || !slope.is_finite() {
            for (di, gi) in d.iter_mut().zip(&g) {
                *di = -gi;
            }
            slope = -gnorm * gnorm;
            since_restart = 0;
        }
        let mut alpha = match prev {
            Some((a, s)) => STEP_GROWTH * a * s / slope,
            None => 1.0 / norm(&d).max(1.0),
        };
        if !(alpha.is_finite() && alpha > 0.0) {
            alpha = 1.0 / norm(&d).max(1.0);
        }

        let accepted = loop {
            if alpha < MIN_STEP {
                break None;
            }
            for i in 0..n {
                xn[i] = x[i] + alpha * d[i];
            }
            let (fnew, gnew) = f(&xn);
            evaluations += 1;
            if !fnew.is_finite() || gnew.iter().any(|v| !v.is_finite()) {
                alpha *= 0.5;
                continue;
            }
            if fnew <= fx + opts.armijo_c1 * alpha * slope {
                break Some((fnew, gnew));
            }
            // Safeguarded quadratic interpolation of the failed trial.
            let denom = 2.0 * (fnew - fx - slope * alpha);
            let quad = if denom > 0.0 { -slope * alpha * alpha / denom } else { 0.0 };
            let lo = 0.1 * alpha;
            let hi = opts.backtrack_factor.max(0.1) * alpha;
            alpha = if quad.is_finite() { quad.clamp(lo, hi.max(lo)) } else { opts.backtrack_factor * alpha };
        };
        let Some((fnew, gnew)) = accepted else {
            status = NcgStatus::Stalled;
            break;
        };

        iterations += 1;
        since_restart += 1;
        let gg = dot(&g, &g);
        let beta = if since_restart >= n.max(1) {
            since_restart = 0;
            0.0
        } else {
            let pr = gnew.iter().zip(&g).map(|(a, b)| a * (a - b)).sum::<f64>() / gg;
            pr.max(0.0)
        };
        for (di, gi) in d.iter_mut().zip(&gnew) {
            *di = -gi + beta * *di;
        }
        prev = Some((alpha, slope));
        std::mem::swap(&mut x, &mut xn);
        fx = fnew;
        g = gnew;
    }
    let grad_norm = norm(&g);
    if status == NcgStatus::MaxIterations && grad_norm <= opts.grad_tol {
        status = NcgStatus::Converged;
    }
    Ok(NcgResult {
        x,
        value: fx,
        grad_norm,
        iterations,
        evaluations,
        status,
    })
}
