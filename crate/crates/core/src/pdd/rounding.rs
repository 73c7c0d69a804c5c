use crate::delay_model::{dims, DecisionVariables, DelayModel};
use crate::error::{Error, Result};
use crate::numerics::PgOptions;
use crate::queueing::{delay_or_inf, DelayBound, STABILITY_MARGIN};

use super::subproblems::{solve_sp2, solve_sp3, PowerMode};

/// Snaps a relaxed point to a binary one.
///
/// Relays: the largest entry of each row if it is at least one half. Association: entries
/// at least one half are taken greedily by descending value (ties by index) while the IoT and
/// sub-band are free and the MEC stays stable; IoTs left over get the free `(j, u)` with the
/// lowest resulting delay. The flag reports whether that repair was needed.
pub fn round_solution(model: &DelayModel, relaxed: &DecisionVariables) -> Result<(DecisionVariables, bool)> {
    let sc = model.scenario;
    let (ni, nj, nm, nu) = dims(sc);
    let mut out = relaxed.clone();
    for i in 0..ni {
        let mut best: Option<(usize, f64)> = None;
        for m in 0..nm {
            let a = relaxed.alpha[[i, m]];
            if best.map_or(true, |(_, b)| a > b) {
                best = Some((m, a));
            }
        }
        for m in 0..nm {
            out.alpha[[i, m]] = match best {
                Some((bm, a)) if bm == m && a >= 0.5 => 1.0,
                _ => 0.0,
            };
        }
    }
    let cap = sc.queue.capacity() - STABILITY_MARGIN;
    let mut cells: Vec<(usize, f64)> = relaxed
        .assoc
        .iter()
        .enumerate()
        .filter(|(_, &v)| v >= 0.5)
        .map(|(k, &v)| (k, v))
        .collect();
    cells.sort_by(|a, b| b.1.total_cmp(&a.1).then(a.0.cmp(&b.0)));
    let mut load = vec![0.0; nj];
    let mut iot_done = vec![false; ni];
    let mut band_used = vec![false; nu];
    out.assoc.fill(0.0);
    for (k, _) in cells {
        let (i, j, u) = (k / (nj * nu), (k / nu) % nj, k % nu);
        let lam = sc.arrival_rates[i];
        if iot_done[i] || band_used[u] || load[j] + lam >= cap {
            continue;
        }
        out.assoc[[i, j, u]] = 1.0;
        iot_done[i] = true;
        band_used[u] = true;
        load[j] += lam;
    }
    let mut repaired = false;
    if iot_done.iter().any(|d| !d) {
        repaired = true;
        let tables = model.relay_tables(&out);
        for i in 0..ni {
            if iot_done[i] {
                continue;
            }
            let lam = sc.arrival_rates[i];
            let mut best: Option<(usize, usize, f64)> = None;
            for j in 0..nj {
                if load[j] + lam >= cap {
                    continue;
                }
                let t_comp = delay_or_inf(DelayBound::Exact, &sc.queue, load[j] + lam);
                for u in 0..nu {
                    if band_used[u] {
                        continue;
                    }
                    let t = model.link_cost(&tables, &out, i, j, u) + t_comp;
                    if best.map_or(true, |(_, _, b)| t < b) {
                        best = Some((j, u, t));
                    }
                }
            }
            let (j, u, _) = best.ok_or_else(|| Error::NoStableAssignment(format!("rounding left IoT {i} unplaced")))?;
            out.assoc[[i, j, u]] = 1.0;
            band_used[u] = true;
            load[j] += lam;
        }
    }
    out.alpha_slack = out.alpha.clone();
    out.assoc_slack = out.assoc.clone();
    Ok((out, repaired))
}

/// Re-solves power (closed form), then placement, then power once more at a binary point.
pub fn finalize_binary(model: &DelayModel, mut vars: DecisionVariables, pg: &PgOptions) -> Result<DecisionVariables> {
    solve_sp2(model, &mut vars, PowerMode::ClosedForm, pg)?;
    solve_sp3(model, &mut vars, pg)?;
    solve_sp2(model, &mut vars, PowerMode::ClosedForm, pg)?;
    Ok(vars)
}
