use crate::error::{Error, Result};

use super::projection::BoxSimplexFeasibleSet;

/// Settings for [`projected_gradient_min`].
#[derive(Debug, Clone, Copy)]
pub struct PgOptions {
    /// Stop once `||x - P(x - grad)||_inf <= tol`.
    pub tol: f64,
    pub max_iter: usize,
    pub initial_step: f64,
    /// Backtracking shrink factor.
    pub beta: f64,
    /// Armijo sufficient-decrease constant.
    pub sigma: f64,
    /// Backtracking gives up below this step.
    pub min_step: f64,
    /// Stop when an accepted step improves the objective by less than this, relative.
    pub ftol: f64,
}

impl Default for PgOptions {
    fn default() -> Self {
        Self {
            tol: 1e-9,
            max_iter: 500,
            initial_step: 1.0,
            beta: 0.5,
            sigma: 1e-4,
            min_step: 1e-20,
            ftol: 1e-13,
        }
    }
}

#[derive(Debug, Clone)]
pub struct PgOutcome {
    pub x: Vec<f64>,
    pub value: f64,
    pub iterations: usize,
    pub converged: bool,
    pub pg_norm: f64,
    /// Objective after each accepted step, starting with the value at the projected start.
    pub trace: Vec<f64>,
}

/// Projected gradient descent with Armijo backtracking along the projection arc.
///
/// Trial steps start at twice the last accepted step, capped at `initial_step`.
pub fn projected_gradient_min<F, G>(
    mut f: F,
    mut grad: G,
    feasible: &BoxSimplexFeasibleSet,
    x0: &[f64],
    opts: &PgOptions,
) -> Result<PgOutcome>
where
    F: FnMut(&[f64]) -> f64,
    G: FnMut(&[f64], &mut [f64]),
{
    let n = x0.len();
    let mut x = feasible.project(x0);
    let mut fx = f(&x);
    if !fx.is_finite() {
        return Err(Error::NonFiniteStart);
    }
    let mut g = vec![0.0; n];
    let mut trial = vec![0.0; n];
    let mut xt = vec![0.0; n];
    let mut trace = vec![fx];
    let mut step = 0.5 * opts.initial_step;
    let mut pg_norm = f64::INFINITY;
    let mut converged = false;
    let mut iterations = 0;
    while iterations < opts.max_iter {
        grad(&x, &mut g);
        for k in 0..n {
            trial[k] = x[k] - g[k];
        }
        feasible.project_into(&trial, &mut xt);
        pg_norm = x.iter().zip(&xt).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
        if pg_norm <= opts.tol {
            converged = true;
            break;
        }
        iterations += 1;
        let mut t = (2.0 * step).min(opts.initial_step);
        let accepted = loop {
            for k in 0..n {
                trial[k] = x[k] - t * g[k];
            }
            feasible.project_into(&trial, &mut xt);
            let ft = f(&xt);
            let decrease: f64 = g.iter().zip(xt.iter().zip(&x)).map(|(gk, (a, b))| gk * (a - b)).sum();
            if ft.is_finite() && ft <= fx + opts.sigma * decrease && ft <= fx {
                break Some(ft);
            }
            t *= opts.beta;
            if t < opts.min_step {
                break None;
            }
        };
        let Some(ft) = accepted else {
            break;
        };
        step = t;
        let gain = fx - ft;
        std::mem::swap(&mut x, &mut xt);
        fx = ft;
        trace.push(fx);
        if gain <= opts.ftol * fx.abs().max(1e-300) {
            converged = true;
            break;
        }
    }
    Ok(PgOutcome {
        x,
        value: fx,
        iterations,
        converged,
        pg_norm,
        trace,
    })
}
