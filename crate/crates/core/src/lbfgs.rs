//! Limited-memory BFGS with Armijo backtracking over flat coordinate
//! vectors.  The objective closure returns `None` for infeasible points
//! (constraint violations), which the line search treats as a rejection.

use crate::error::{CoreError, Result};

pub struct LbfgsOptions {
    pub memory: usize,
    pub max_iter: usize,
    /// Stop when the sup-norm of the gradient drops below this.
    pub grad_tol: f64,
    /// Armijo slope fraction.
    pub c1: f64,
    /// Backtracking shrink factor.
    pub shrink: f64,
    pub max_backtracks: usize,
    /// Relative roundoff slack added to the Armijo test so the search can
    /// keep following the (still accurate) gradient once objective-value
    /// differences fall below evaluation noise.
    pub noise_slack: f64,
}

impl Default for LbfgsOptions {
    fn default() -> Self {
        LbfgsOptions {
            memory: 10,
            max_iter: 2000,
            grad_tol: 1e-10,
            c1: 1e-4,
            shrink: 0.5,
            max_backtracks: 60,
            noise_slack: 1e-13,
        }
    }
}

#[derive(Debug)]
pub struct LbfgsOutcome {
    pub x: Vec<f64>,
    pub value: f64,
    pub grad_sup: f64,
    pub iterations: usize,
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn sup(a: &[f64]) -> f64 {
    a.iter().fold(0.0f64, |m, x| m.max(x.abs()))
}

/// Minimizes `f` starting at `x0`.  `f` must return the value and gradient,
/// or `None` when the point is infeasible; `x0` itself must be feasible.
/// Returns the best iterate; `Err(MaxIterExceeded)` carries the achieved
/// gradient norm, `Err(LineSearchFailed)` means no feasible descent step.
pub fn minimize<F>(x0: Vec<f64>, f: F, opts: &LbfgsOptions, step_label: usize) -> Result<LbfgsOutcome>
where
    F: Fn(&[f64]) -> Option<(f64, Vec<f64>)>,
{
    let n = x0.len();
    let mut x = x0;
    let (mut fx, mut gx) = f(&x).ok_or(CoreError::LineSearchFailed { step: step_label })?;
    let mut s_hist: Vec<Vec<f64>> = Vec::new();
    let mut y_hist: Vec<Vec<f64>> = Vec::new();
    let mut rho_hist: Vec<f64> = Vec::new();

    for iter in 0..opts.max_iter {
        let gsup = sup(&gx);
        if gsup <= opts.grad_tol {
            return Ok(LbfgsOutcome {
                x,
                value: fx,
                grad_sup: gsup,
                iterations: iter,
            });
        }

        // two-loop recursion
        let mut d: Vec<f64> = gx.iter().map(|g| -g).collect();
        let m = s_hist.len();
        let mut alpha = vec![0.0; m];
        for i in (0..m).rev() {
            alpha[i] = rho_hist[i] * dot(&s_hist[i], &d);
            for (dj, yj) in d.iter_mut().zip(&y_hist[i]) {
                *dj -= alpha[i] * yj;
            }
        }
        if m > 0 {
            let last = m - 1;
            let yy = dot(&y_hist[last], &y_hist[last]);
            if yy > 0.0 {
                let gamma = 1.0 / (rho_hist[last] * yy);
                d.iter_mut().for_each(|v| *v *= gamma);
            }
        }
        for i in 0..m {
            let beta = rho_hist[i] * dot(&y_hist[i], &d);
            for (dj, sj) in d.iter_mut().zip(&s_hist[i]) {
                *dj += (alpha[i] - beta) * sj;
            }
        }

        let mut slope = dot(&gx, &d);
        if slope >= 0.0 {
            // curvature information went stale; fall back to steepest descent
            d = gx.iter().map(|g| -g).collect();
            slope = -dot(&gx, &gx);
            s_hist.clear();
            y_hist.clear();
            rho_hist.clear();
        }

        // Armijo backtracking with feasibility rejection
        let mut t = 1.0;
        let mut accepted = None;
        for _ in 0..opts.max_backtracks {
            let xt: Vec<f64> = x.iter().zip(&d).map(|(xi, di)| xi + t * di).collect();
            if let Some((ft, gt)) = f(&xt) {
                let slack = opts.noise_slack * (1.0 + fx.abs());
                if ft <= fx + opts.c1 * t * slope + slack {
                    accepted = Some((xt, ft, gt, t));
                    break;
                }
            }
            t *= opts.shrink;
        }
        let Some((xn, fn_, gn, _t)) = accepted else {
            return Err(CoreError::LineSearchFailed { step: step_label });
        };

        let s: Vec<f64> = xn.iter().zip(&x).map(|(a, b)| a - b).collect();
        let yv: Vec<f64> = gn.iter().zip(&gx).map(|(a, b)| a - b).collect();
        let sy = dot(&s, &yv);
        if sy > 1e-14 * sup(&s) * sup(&yv).max(1e-300) {
            if s_hist.len() == opts.memory {
                s_hist.remove(0);
                y_hist.remove(0);
                rho_hist.remove(0);
            }
            rho_hist.push(1.0 / sy);
            s_hist.push(s);
            y_hist.push(yv);
        }
        x = xn;
        fx = fn_;
        gx = gn;
        debug_assert_eq!(x.len(), n);
    }
    Err(CoreError::MaxIterExceeded {
        step: step_label,
        residual: sup(&gx),
        tol: opts.grad_tol,
    })
}
