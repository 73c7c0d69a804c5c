//! Block solvers for relay selection (SP1), UAV power (SP2), UAV placement (SP3) and
//! association (SP4.1).

use ndarray::Array3;

use crate::delay_model::{dims, slack_update, weighted, DecisionVariables, DelayModel, DualState};
use crate::error::{Error, Result};
use crate::numerics::{
    bisect, lambert_w0, projected_gradient_min, relay_convexity_threshold, BoxSimplexFeasibleSet, PgOptions,
    SumKind,
};
use crate::queueing::{DelayBound, STABILITY_MARGIN};
use crate::scenario::distance;

/// How SP1 picks relays.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RelayMode {
    /// Binary rule: cheapest relay if it beats the direct link.
    Rule,
    /// Projected gradient on the penalized per-IoT objective.
    Relaxed,
}

/// How SP2 allocates UAV power.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PowerMode {
    /// Lambert-W allocation with a bisection on the budget multiplier.
    ClosedForm,
    /// Projected gradient over the power box with per-UAV budget caps.
    Relaxed,
}

/// Index of the relay to use, or `None` for the direct link. Ties favour the direct link,
/// then the lowest UAV index.
pub fn relay_rule(t_direct: f64, t_relay: &[f64]) -> Option<usize> {
    let mut best: Option<(usize, f64)> = None;
    for (m, &t) in t_relay.iter().enumerate() {
        if best.map_or(true, |(_, b)| t < b) {
            best = Some((m, t));
        }
    }
    match best {
        Some((m, t)) if t < t_direct => Some(m),
        _ => None,
    }
}

/// Whether every association entry lies within `band` of 0 or 1.
pub fn assoc_near_binary(vars: &DecisionVariables, band: f64) -> bool {
    vars.assoc.iter().all(|&z| z <= band || z >= 1.0 - band)
}

/// Power used when judging a relay IoT `i` does not use yet: an equal share of the budget
/// among the IoTs already on UAV `m` plus `i`.
pub fn prospective_power(vars: &DecisionVariables, i: usize, m: usize, budget: f64) -> f64 {
    let p = vars.power[[i, m]];
    if p > 0.0 {
        return p;
    }
    let others = (0..vars.num_iots())
        .filter(|&k| k != i && vars.alpha[[k, m]] >= 0.5)
        .count();
    budget / (others + 1) as f64
}

/// Association-weighted direct delay of IoT `i` and its relay delay via each UAV at the
/// given per-UAV powers.
pub fn path_delays(model: &DelayModel, vars: &DecisionVariables, i: usize, powers: &[f64]) -> (f64, Vec<f64>) {
    let (_, nj, nm, nu) = dims(model.scenario);
    let mut direct = 0.0;
    let mut relay = vec![0.0; nm];
    for j in 0..nj {
        for u in 0..nu {
            let z = vars.assoc[[i, j, u]];
            if z == 0.0 {
                continue;
            }
            direct += weighted(z, model.direct_delay(i, j, u));
            for m in 0..nm {
                let q = &vars.positions[m];
                let t = model.uplink_delay(i, q, u) + model.downlink_delay(q, j, powers[m], u);
                relay[m] += weighted(z, t);
            }
        }
    }
    (direct, relay)
}

/// Penalty on one relaxed binary after minimizing out its slack:
/// `(x^2 + (rho e2 - 1) x + rho e1)^2 / (1 + x^2)`, with its derivative.
pub(crate) fn reduced_penalty(x: f64, rho: f64, e1: f64, e2: f64) -> (f64, f64) {
    let n = x * x + (rho * e2 - 1.0) * x + rho * e1;
    let d = 1.0 + x * x;
    let dn = 2.0 * x + rho * e2 - 1.0;
    (n * n / d, (2.0 * n * dn * d - n * n * 2.0 * x) / (d * d))
}

const UNASSOCIATED: f64 = 1e-9;

pub fn solve_sp1(model: &DelayModel, vars: &mut DecisionVariables, duals: &DualState, mode: RelayMode, pg: &PgOptions) {
    let (ni, _, nm, _) = dims(model.scenario);
    if nm == 0 {
        return;
    }
    let budget = model.scenario.uav_tx_power_budget;
    let rho = duals.rho_alpha;
    for i in 0..ni {
        let powers: Vec<f64> = (0..nm).map(|m| prospective_power(vars, i, m, budget)).collect();
        let (direct, relay) = path_delays(model, vars, i, &powers);
        // An IoT with no association mass has no delay to trade off; its relay row is kept
        // so the association block sees the costs it last had.
        let unassociated = vars.assoc.slice(ndarray::s![i, .., ..]).sum() <= UNASSOCIATED;
        match mode {
            _ if unassociated => {}
            RelayMode::Rule => {
                let pick = relay_rule(direct, &relay);
                for m in 0..nm {
                    vars.alpha[[i, m]] = if pick == Some(m) { 1.0 } else { 0.0 };
                }
            }
            RelayMode::Relaxed => {
                let slope: Vec<f64> = relay.iter().map(|r| r - direct).collect();
                let upper: Vec<f64> = slope.iter().map(|s| if s.is_finite() { 1.0 } else { 0.0 }).collect();
                let set = BoxSimplexFeasibleSet::new(vec![0.0; nm], upper)
                    .and_then(|s| s.with_group((0..nm).collect(), None, SumKind::AtMost, 1.0))
                    .expect("relay simplex is nonempty");
                let e1: Vec<f64> = (0..nm).map(|m| duals.eta_alpha1[[i, m]]).collect();
                let e2: Vec<f64> = (0..nm).map(|m| duals.eta_alpha2[[i, m]]).collect();
                let f = |a: &[f64]| -> f64 {
                    let mut v = 0.0;
                    for m in 0..nm {
                        v += weighted(a[m], slope[m]) + reduced_penalty(a[m], rho, e1[m], e2[m]).0 / (2.0 * rho);
                    }
                    v
                };
                let g = |a: &[f64], out: &mut [f64]| {
                    for m in 0..nm {
                        let s = if slope[m].is_finite() { slope[m] } else { 0.0 };
                        out[m] = s + reduced_penalty(a[m], rho, e1[m], e2[m]).1 / (2.0 * rho);
                    }
                };
                let x0: Vec<f64> = (0..nm).map(|m| vars.alpha[[i, m]]).collect();
                if let Ok(out) = projected_gradient_min(f, g, &set, &x0, pg) {
                    for m in 0..nm {
                        vars.alpha[[i, m]] = out.x[m];
                    }
                }
            }
        }
        for m in 0..nm {
            vars.alpha_slack[[i, m]] = slack_update(
                vars.alpha[[i, m]],
                rho,
                duals.eta_alpha1[[i, m]],
                duals.eta_alpha2[[i, m]],
            );
        }
    }
}

/// Closed-form power split for one UAV: `P_i = (exp(2 W(sqrt(l_i / mu) / 2)) - 1) / gamma_i`,
/// with the multiplier `mu` set by bisection so the powers use the whole budget.
pub fn theorem2_powers(l: &[f64], gamma: &[f64], budget: f64) -> Result<Vec<f64>> {
    if l.len() != gamma.len() || l.is_empty() {
        return Err(Error::Domain("need matching, nonempty l and gamma".into()));
    }
    if l.iter().chain(gamma).any(|v| !(*v > 0.0 && v.is_finite())) {
        return Err(Error::Domain("l and gamma must be positive and finite".into()));
    }
    if l.len() == 1 {
        return Ok(vec![budget]);
    }
    let powers_at = |log_mu: f64| -> Vec<f64> {
        let mu = log_mu.exp();
        l.iter()
            .zip(gamma)
            .map(|(&li, &gi)| {
                let w = lambert_w0(0.5 * (li / mu).sqrt()).unwrap_or(f64::INFINITY);
                (2.0 * w).exp_m1() / gi
            })
            .collect()
    };
    let excess = |log_mu: f64| powers_at(log_mu).iter().sum::<f64>() - budget;
    let (mut lo, mut hi) = (-1.0, 1.0);
    while excess(lo) <= 0.0 {
        lo -= 8.0;
        if lo < -1400.0 {
            return Err(Error::Degenerate("power multiplier bracket not found".into()));
        }
    }
    while excess(hi) >= 0.0 {
        hi += 8.0;
        if hi > 1400.0 {
            return Err(Error::Degenerate("power multiplier bracket not found".into()));
        }
    }
    let root = bisect(excess, lo, hi, 1e-13)?.root;
    let mut p = powers_at(root);
    let total: f64 = p.iter().sum();
    for v in &mut p {
        *v *= budget / total;
    }
    Ok(p)
}

/// Objective of SP2 for one UAV: `sum_i alpha_im sum_{j,u} z_iju T(d_mj, P_im, u)`.
fn sp2_uav_terms(model: &DelayModel, vars: &DecisionVariables, m: usize) -> Vec<(usize, f64, f64, usize)> {
    let (ni, nj, _, nu) = dims(model.scenario);
    let q = &vars.positions[m];
    let mut terms = Vec::new();
    for j in 0..nj {
        let d = distance(q, &model.scenario.mec_positions[j]);
        for i in 0..ni {
            let a = vars.alpha[[i, m]];
            if a == 0.0 {
                continue;
            }
            for u in 0..nu {
                let z = vars.assoc[[i, j, u]];
                if z != 0.0 {
                    terms.push((i, a * z, d, u));
                }
            }
        }
    }
    terms
}

fn term_slots(terms: &[(usize, f64, f64, usize)], served: &[usize]) -> Vec<usize> {
    terms
        .iter()
        .map(|t| served.iter().position(|&i| i == t.0).unwrap())
        .collect()
}

fn power_objective(model: &DelayModel, terms: &[(usize, f64, f64, usize)], slot: &[usize], p: &[f64], grad: Option<&mut [f64]>) -> f64 {
    if let Some(out) = grad {
        out.iter_mut().for_each(|v| *v = 0.0);
        for (&(_, w, d, u), &k) in terms.iter().zip(slot) {
            out[k] += w * model.hop_delay_dpower(d, p[k], u);
        }
    }
    terms
        .iter()
        .zip(slot)
        .map(|(&(_, w, d, u), &k)| weighted(w, model.hop_delay(d, p[k], u)))
        .sum()
}

/// SP2 objective of UAV `m` at powers `p`, one entry per IoT with `alpha_im > 0` in index
/// order, with its gradient.
pub fn sp2_objective(model: &DelayModel, vars: &DecisionVariables, m: usize, p: &[f64], grad: Option<&mut [f64]>) -> f64 {
    let served: Vec<usize> = (0..vars.num_iots()).filter(|&i| vars.alpha[[i, m]] > 0.0).collect();
    assert_eq!(p.len(), served.len(), "one power per served IoT");
    let terms = sp2_uav_terms(model, vars, m);
    power_objective(model, &terms, &term_slots(&terms, &served), p, grad)
}

pub fn solve_sp2(model: &DelayModel, vars: &mut DecisionVariables, mode: PowerMode, pg: &PgOptions) -> Result<()> {
    let (ni, nj, nm, nu) = dims(model.scenario);
    let budget = model.scenario.uav_tx_power_budget;
    let b = model.scenario.subband_bandwidth;
    let d_in = model.scenario.task_input_size;
    for m in 0..nm {
        let served: Vec<usize> = (0..ni).filter(|&i| vars.alpha[[i, m]] > 0.0).collect();
        for i in 0..ni {
            if vars.alpha[[i, m]] == 0.0 {
                vars.power[[i, m]] = 0.0;
            }
        }
        if served.is_empty() {
            continue;
        }
        match mode {
            PowerMode::ClosedForm => {
                let q = vars.positions[m];
                let mut l = Vec::with_capacity(served.len());
                let mut gamma = Vec::with_capacity(served.len());
                for &i in &served {
                    let mut best = (0, 0, f64::NEG_INFINITY);
                    for j in 0..nj {
                        for u in 0..nu {
                            if vars.assoc[[i, j, u]] > best.2 {
                                best = (j, u, vars.assoc[[i, j, u]]);
                            }
                        }
                    }
                    let zsum: f64 = vars.assoc.slice(ndarray::s![i, .., ..]).sum();
                    let d = distance(&q, &model.scenario.mec_positions[best.0]);
                    let g = model.normalized_gain(d, best.1);
                    let weight = vars.alpha[[i, m]] * zsum.max(f64::MIN_POSITIVE);
                    gamma.push(g);
                    l.push(d_in * std::f64::consts::LN_2 / b * weight * g);
                }
                let p = theorem2_powers(&l, &gamma, budget)?;
                for (k, &i) in served.iter().enumerate() {
                    vars.power[[i, m]] = p[k];
                }
            }
            PowerMode::Relaxed => {
                let terms = sp2_uav_terms(model, vars, m);
                let n = served.len();
                let slot = term_slots(&terms, &served);
                let f = |p: &[f64]| power_objective(model, &terms, &slot, p, None);
                let g = |p: &[f64], out: &mut [f64]| {
                    power_objective(model, &terms, &slot, p, Some(out));
                };
                let set = BoxSimplexFeasibleSet::uniform(n, 0.0, budget)?.with_group(
                    (0..n).collect(),
                    None,
                    SumKind::AtMost,
                    budget,
                )?;
                let mut x0: Vec<f64> = served.iter().map(|&i| vars.power[[i, m]]).collect();
                if x0.iter().any(|&p| p <= 0.0) {
                    x0 = vec![budget / n as f64; n];
                }
                let opts = PgOptions {
                    initial_step: pg.initial_step.max(1e4),
                    ..*pg
                };
                let out = projected_gradient_min(f, g, &set, &x0, &opts)?;
                for (k, &i) in served.iter().enumerate() {
                    vars.power[[i, m]] = out.x[k];
                }
            }
        }
    }
    Ok(())
}

/// One weighted hop pair feeding a UAV's placement objective.
#[derive(Debug, Clone, Copy)]
pub(crate) struct PlacementTerm {
    pub weight: f64,
    pub iot: [f64; 3],
    pub mec: [f64; 3],
    pub power: f64,
    pub u: usize,
}

pub(crate) fn placement_terms(model: &DelayModel, vars: &DecisionVariables, m: usize) -> Vec<PlacementTerm> {
    let (ni, nj, _, nu) = dims(model.scenario);
    let mut terms = Vec::new();
    for i in 0..ni {
        let a = vars.alpha[[i, m]];
        if a == 0.0 {
            continue;
        }
        for j in 0..nj {
            for u in 0..nu {
                let z = vars.assoc[[i, j, u]];
                if z != 0.0 {
                    terms.push(PlacementTerm {
                        weight: a * z,
                        iot: model.scenario.iot_positions[i],
                        mec: model.scenario.mec_positions[j],
                        power: vars.power[[i, m]],
                        u,
                    });
                }
            }
        }
    }
    terms
}

/// Relay-hop delay sum of one UAV at horizontal position `xy`, and its gradient.
pub(crate) fn placement_objective(model: &DelayModel, terms: &[PlacementTerm], xy: &[f64], grad: Option<&mut [f64]>) -> f64 {
    let h = model.scenario.uav_altitude;
    let q = [xy[0], xy[1], h];
    let p_iot = model.scenario.iot_tx_power;
    let mut total = 0.0;
    let mut gx = 0.0;
    let mut gy = 0.0;
    for t in terms {
        let d1 = distance(&t.iot, &q);
        let d2 = distance(&q, &t.mec);
        total += weighted(t.weight, model.hop_delay(d1, p_iot, t.u) + model.hop_delay(d2, t.power, t.u));
        let s1 = t.weight * model.hop_delay_ddistance(d1, p_iot, t.u) / d1;
        let s2 = t.weight * model.hop_delay_ddistance(d2, t.power, t.u) / d2;
        gx += s1 * (q[0] - t.iot[0]) + s2 * (q[0] - t.mec[0]);
        gy += s1 * (q[1] - t.iot[1]) + s2 * (q[1] - t.mec[1]);
    }
    if let Some(g) = grad {
        g[0] = gx;
        g[1] = gy;
    }
    total
}

/// SP3 objective of UAV `m` at horizontal position `xy`, with its gradient.
pub fn sp3_objective(model: &DelayModel, vars: &DecisionVariables, m: usize, xy: &[f64], grad: Option<&mut [f64]>) -> f64 {
    placement_objective(model, &placement_terms(model, vars, m), xy, grad)
}

/// Number of UAVs whose current hops break the convexity condition `g < 41.412` are
/// returned; the solve proceeds regardless.
pub fn solve_sp3(model: &DelayModel, vars: &mut DecisionVariables, pg: &PgOptions) -> Result<usize> {
    let nm = model.scenario.num_uavs;
    let side = model.scenario.area_side;
    let threshold = relay_convexity_threshold();
    let mut warned = 0;
    for m in 0..nm {
        let terms = placement_terms(model, vars, m);
        if terms.is_empty() {
            continue;
        }
        let q = vars.positions[m];
        let violates = terms.iter().any(|t| {
            let g1 = 1.0 + model.scenario.iot_tx_power * model.normalized_gain(distance(&t.iot, &q), t.u);
            let g2 = 1.0 + t.power * model.normalized_gain(distance(&q, &t.mec), t.u);
            g1 >= threshold || g2 >= threshold
        });
        if violates {
            warned += 1;
            log::warn!("UAV {m}: hop SNR above the placement convexity threshold; placement may be a local optimum");
        }
        let set = BoxSimplexFeasibleSet::uniform(2, 0.0, side)?;
        let opts = PgOptions {
            initial_step: pg.initial_step.max(1e6),
            ..*pg
        };
        let out = projected_gradient_min(
            |xy| placement_objective(model, &terms, xy, None),
            |xy, g| {
                placement_objective(model, &terms, xy, Some(g));
            },
            &set,
            &[q[0], q[1]],
            &opts,
        )?;
        vars.positions[m] = [out.x[0], out.x[1], model.scenario.uav_altitude];
    }
    Ok(warned)
}

/// Relaxed association objective of SP4.1 (slack minimized out) and its gradient.
pub(crate) struct AssocObjective<'a> {
    pub model: &'a DelayModel<'a>,
    pub costs: Array3<f64>,
    pub duals: &'a DualState,
    pub bound: DelayBound,
    pub penalized: bool,
}

impl AssocObjective<'_> {
    pub fn value(&self, z: &Array3<f64>, grad: Option<&mut Array3<f64>>) -> f64 {
        let (ni, nj, nu) = z.dim();
        let mut total = self.model.computation_sum_and_grad(z, self.bound, None);
        let mut g = grad;
        if let Some(g) = g.as_deref_mut() {
            self.model.computation_sum_and_grad(z, self.bound, Some(g));
        }
        for ((i, j, u), &v) in z.indexed_iter() {
            let c = self.costs[[i, j, u]];
            total += weighted(v, c);
            if let Some(g) = g.as_deref_mut() {
                g[[i, j, u]] += if c.is_finite() { c } else { 0.0 };
            }
        }
        if !self.penalized {
            return total;
        }
        let d = self.duals;
        let rho = d.rho_z;
        let scale = 1.0 / (2.0 * rho);
        let mut pen = 0.0;
        for ((i, j, u), &v) in z.indexed_iter() {
            let (p, dp) = reduced_penalty(v, rho, d.eta_z1[[i, j, u]], d.eta_z2[[i, j, u]]);
            pen += p;
            if let Some(g) = g.as_deref_mut() {
                g[[i, j, u]] += scale * dp;
            }
        }
        let mut ru = vec![0.0; nu];
        for u in 0..nu {
            ru[u] = z.slice(ndarray::s![.., .., u]).sum() - 1.0 + rho * d.eta_z_u[u];
            pen += ru[u] * ru[u];
        }
        let mut ri = vec![0.0; ni];
        for i in 0..ni {
            ri[i] = z.slice(ndarray::s![i, .., ..]).sum() - 1.0 + rho * d.eta_z_i[i];
            pen += ri[i] * ri[i];
        }
        if let Some(g) = g {
            for i in 0..ni {
                for j in 0..nj {
                    for u in 0..nu {
                        g[[i, j, u]] += scale * 2.0 * (ru[u] + ri[i]);
                    }
                }
            }
        }
        total + scale * pen
    }
}

/// SP4.1 augmented objective at association `z`, other blocks taken from `vars`, with its
/// gradient. The slack is minimized out in closed form.
pub fn sp4_objective(model: &DelayModel, vars: &DecisionVariables, duals: &DualState, z: &Array3<f64>, grad: Option<&mut Array3<f64>>) -> f64 {
    let tables = model.relay_tables(vars);
    AssocObjective {
        model,
        costs: model.link_costs(&tables, vars),
        duals,
        bound: DelayBound::Upper,
        penalized: true,
    }
    .value(z, grad)
}

/// Box `[0, 1]` (cells with an impossible link pinned to 0) with one weighted stability cap
/// per MEC: `sum_{i,u} lambda_i z_iju <= s mu - margin`.
pub(crate) fn assoc_feasible_set(model: &DelayModel, costs: &Array3<f64>) -> Result<BoxSimplexFeasibleSet> {
    let (ni, nj, nu) = costs.dim();
    let upper: Vec<f64> = costs.iter().map(|c| if c.is_finite() { 1.0 } else { 0.0 }).collect();
    let mut set = BoxSimplexFeasibleSet::new(vec![0.0; upper.len()], upper)?;
    let cap = model.scenario.queue.capacity() - STABILITY_MARGIN;
    for j in 0..nj {
        let mut idx = Vec::with_capacity(ni * nu);
        let mut w = Vec::with_capacity(ni * nu);
        for i in 0..ni {
            for u in 0..nu {
                idx.push((i * nj + j) * nu + u);
                w.push(model.scenario.arrival_rates[i]);
            }
        }
        set = set.with_group(idx, Some(w), SumKind::AtMost, cap)?;
    }
    Ok(set)
}

/// Association update. Relays chosen for an IoT that has no power yet are priced at the
/// prospective equal share; the return value says whether that happened, in which case the
/// caller should re-solve the powers.
pub fn solve_sp4(model: &DelayModel, vars: &mut DecisionVariables, duals: &DualState, pg: &PgOptions) -> Result<bool> {
    let budget = model.scenario.uav_tx_power_budget;
    let mut priced = vars.clone();
    let mut substituted = false;
    for ((i, m), p) in priced.power.indexed_iter_mut() {
        if vars.alpha[[i, m]] > 0.0 && *p == 0.0 {
            *p = prospective_power(vars, i, m, budget);
            substituted = true;
        }
    }
    let tables = model.relay_tables(&priced);
    let costs = model.link_costs(&tables, &priced);
    let set = assoc_feasible_set(model, &costs)?;
    let shape = vars.assoc.dim();
    let obj = AssocObjective {
        model,
        costs,
        duals,
        bound: DelayBound::Upper,
        penalized: true,
    };
    let x0: Vec<f64> = vars.assoc.iter().cloned().collect();
    let out = projected_gradient_min(
        |x| obj.value(&Array3::from_shape_vec(shape, x.to_vec()).unwrap(), None),
        |x, g| {
            let mut ga = Array3::zeros(shape);
            obj.value(&Array3::from_shape_vec(shape, x.to_vec()).unwrap(), Some(&mut ga));
            g.copy_from_slice(ga.as_slice().unwrap());
        },
        &set,
        &x0,
        pg,
    );
    let out = match out {
        Ok(o) => o,
        Err(Error::NonFiniteStart) => {
            return Err(Error::NoStableAssignment("association start point is unstable".into()))
        }
        Err(e) => return Err(e),
    };
    vars.assoc = Array3::from_shape_vec(shape, out.x).unwrap();
    for ((i, j, u), zt) in vars.assoc_slack.indexed_iter_mut() {
        *zt = slack_update(
            vars.assoc[[i, j, u]],
            duals.rho_z,
            duals.eta_z1[[i, j, u]],
            duals.eta_z2[[i, j, u]],
        );
    }
    Ok(substituted)
}
