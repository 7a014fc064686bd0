//! Damped Newton iteration with a backtracking line search on `‖r(x)‖`.

use nalgebra::{DMatrix, DVector};

use crate::linalg;
use crate::prelude::*;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NewtonOptions {
    /// Stop once `‖r(x)‖ ≤ tol`.
    pub tol: f64,
    pub max_iter: usize,
    /// Smallest step fraction tried by the line search.
    pub min_step: f64,
}

impl Default for NewtonOptions {
    fn default() -> Self {
        Self {
            tol: 1e-12,
            max_iter: 100,
            min_step: 1.0 / 1048576.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct NewtonOutcome {
    pub x: DVector<f64>,
    pub residual: f64,
    pub iterations: usize,
    pub history: Vec<f64>,
}

/// Runs damped Newton on `residual` from `x0`.
///
/// `jacobian` may return `None`, in which case a central-difference Jacobian
/// is used. On failure the last iterate is returned in `Err`.
pub fn damped_newton<R, J>(
    residual: R,
    jacobian: J,
    x0: DVector<f64>,
    opts: &NewtonOptions,
) -> Result<NewtonOutcome, NewtonOutcome>
where
    R: Fn(&DVector<f64>) -> DVector<f64>,
    J: Fn(&DVector<f64>) -> Option<DMatrix<f64>>,
{
    let mut x = x0;
    let mut r = residual(&x);
    let mut rn = r.norm();
    let mut history = vec![rn];
    let mut it = 0;
    while it < opts.max_iter {
        if rn <= opts.tol {
            return Ok(NewtonOutcome { x, residual: rn, iterations: it, history });
        }
        if !rn.is_finite() {
            break;
        }
        it += 1;
        let jac = jacobian(&x).unwrap_or_else(|| linalg::fd_jacobian(&residual, &x));
        let Some(dir) = linalg::solve_dense(&jac, &(-&r)) else {
            break;
        };
        let mut step = 1.0;
        let mut accepted = None;
        while step >= opts.min_step {
            let trial = &x + &dir * step;
            let tr = residual(&trial);
            let tn = tr.norm();
            if tn.is_finite() && tn <= (1.0 - 1e-4 * step) * rn {
                accepted = Some((trial, tr, tn));
                break;
            }
            step *= 0.5;
        }
        let Some((nx, nr, nn)) = accepted else {
            break;
        };
        x = nx;
        r = nr;
        rn = nn;
        history.push(rn);
    }
    let outcome = NewtonOutcome { x, residual: rn, iterations: it, history };
    if rn <= opts.tol {
        Ok(outcome)
    } else {
        Err(outcome)
    }
}
