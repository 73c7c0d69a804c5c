use ndarray::Array3;

use crate::delay_model::{dims, weighted, DecisionVariables, DelayModel};
use crate::error::{Error, Result};
use crate::numerics::min_cost_assignment;
use crate::queueing::DelayBound;

fn objective(model: &DelayModel, costs: &Array3<f64>, z: &Array3<f64>, bound: DelayBound) -> f64 {
    let comm: f64 = z.iter().zip(costs).map(|(&v, &c)| weighted(v, c)).sum();
    comm + model.computation_sum_and_grad(z, bound, None)
}

/// Successive linearization of the association objective with `alpha`, `P` and `q` held.
///
/// Each step linearizes communication plus computation delay at the current relaxed `z`,
/// minimizes the linear model over one-cell-per-IoT, one-IoT-per-sub-band assignments
/// (Hungarian method), and moves toward that vertex by `damping`, halved until the
/// objective drops. Returns the relaxed association and the objective after each step.
pub fn sca_association(
    model: &DelayModel,
    vars: &DecisionVariables,
    bound: DelayBound,
    damping: f64,
    max_iter: usize,
    tol: f64,
) -> Result<(Array3<f64>, Vec<f64>)> {
    let (ni, nj, _, nu) = dims(model.scenario);
    let tables = model.relay_tables(vars);
    let costs = model.link_costs(&tables, vars);
    let mut z = vars.assoc.clone();
    let mut fz = objective(model, &costs, &z, bound);
    if !fz.is_finite() {
        return Err(Error::NoStableAssignment("association start point is unstable".into()));
    }
    let mut trace = vec![fz];
    let mut grad = Array3::zeros(z.dim());
    for _ in 0..max_iter {
        model.computation_sum_and_grad(&z, bound, Some(&mut grad));
        let mut pick = vec![vec![0usize; nu]; ni];
        let table: Vec<Vec<f64>> = (0..ni)
            .map(|i| {
                (0..nu)
                    .map(|u| {
                        let mut best = (0, f64::INFINITY);
                        for j in 0..nj {
                            let g = costs[[i, j, u]] + grad[[i, j, u]];
                            if g < best.1 {
                                best = (j, g);
                            }
                        }
                        pick[i][u] = best.0;
                        best.1
                    })
                    .collect()
            })
            .collect();
        let cols = min_cost_assignment(&table);
        let mut vertex = Array3::zeros(z.dim());
        for (i, &u) in cols.iter().enumerate() {
            vertex[[i, pick[i][u], u]] = 1.0;
        }
        let dir = &vertex - &z;
        let mut step = damping;
        let mut accepted = None;
        while step >= 1e-6 {
            let cand = &z + &(&dir * step);
            let fc = objective(model, &costs, &cand, bound);
            if fc.is_finite() && fc < fz {
                accepted = Some((cand, fc));
                break;
            }
            step *= 0.5;
        }
        let Some((cand, fc)) = accepted else { break };
        let moved = dir.iter().fold(0.0f64, |a, d| a.max(d.abs())) * step;
        z = cand;
        fz = fc;
        trace.push(fz);
        if moved <= tol {
            break;
        }
    }
    Ok((z, trace))
}
