//! Penalty dual decomposition: inner block sweeps over relay selection, power, placement
//! and association on the augmented Lagrangian; outer multiplier and penalty updates.

mod rounding;
pub mod subproblems;

use std::time::Instant;

use serde::{Deserialize, Serialize};

use crate::delay_model::{dims, violation, DecisionVariables, DelayModel, DualState};
use crate::error::{invalid, Error, Result};
use crate::numerics::PgOptions;
use crate::queueing::{DelayBound, STABILITY_MARGIN};
use crate::report::{ReportParts, RunReport, Termination};
use crate::scenario::{distance, NetworkScenario};

pub use rounding::{finalize_binary, round_solution};
pub use subproblems::{
    assoc_near_binary, path_delays, prospective_power, relay_rule, solve_sp1, solve_sp2, solve_sp3, solve_sp4,
    theorem2_powers, PowerMode, RelayMode,
};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct PddConfig {
    /// Outer tolerance on the violation indicator.
    pub eps_outer: f64,
    /// Inner tolerance on the change of the augmented Lagrangian between sweeps.
    pub eps_inner: f64,
    pub max_inner: usize,
    pub max_outer: usize,
    pub shrink: f64,
    pub rho_alpha: f64,
    pub rho_z: f64,
    /// Penalty below which the binary relay rule and the closed-form power split engage.
    pub theorem_rho: f64,
    /// Association entries within this distance of {0, 1} count as binary.
    pub binary_band: f64,
    pub pg_tol: f64,
    pub pg_max_iter: usize,
}

impl Default for PddConfig {
    fn default() -> Self {
        Self {
            eps_outer: 1e-3,
            eps_inner: 1e-4,
            max_inner: 50,
            max_outer: 60,
            shrink: 0.8,
            rho_alpha: 1e-2,
            rho_z: 1e-2,
            theorem_rho: 1e-2,
            binary_band: 0.05,
            pg_tol: 1e-9,
            pg_max_iter: 200,
        }
    }
}

impl PddConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.eps_outer > 0.0 && self.eps_inner > 0.0) {
            return Err(invalid("eps", "tolerances must be > 0"));
        }
        if !(self.shrink > 0.0 && self.shrink < 1.0) {
            return Err(invalid("shrink", format!("must lie in (0, 1), got {}", self.shrink)));
        }
        if self.max_inner == 0 || self.max_outer == 0 || self.pg_max_iter == 0 {
            return Err(invalid("max_iter", "iteration caps must be >= 1"));
        }
        if !(self.rho_alpha > 0.0 && self.rho_z > 0.0) {
            return Err(invalid("rho", "initial penalties must be > 0"));
        }
        Ok(())
    }

    pub fn pg(&self) -> PgOptions {
        PgOptions {
            tol: self.pg_tol,
            max_iter: self.pg_max_iter,
            // Multiplier terms make the augmented Lagrangian large and nearly constant, so a
            // relative progress test stops far from stationarity.
            ftol: 0.0,
            ..PgOptions::default()
        }
    }
}

/// Each IoT, by ascending index, takes the nearest MEC that stays below capacity, on
/// sub-band `i`.
pub fn nearest_stable_association(scenario: &NetworkScenario) -> Result<ndarray::Array3<f64>> {
    let (ni, nj, _, nu) = dims(scenario);
    if nu < ni {
        return Err(Error::InsufficientSubbands { subbands: nu, iots: ni });
    }
    let cap = scenario.queue.capacity() - STABILITY_MARGIN;
    let mut load = vec![0.0; nj];
    let mut z = ndarray::Array3::zeros((ni, nj, nu));
    for i in 0..ni {
        let mut order: Vec<usize> = (0..nj).collect();
        let p = &scenario.iot_positions[i];
        order.sort_by(|&a, &b| {
            distance(p, &scenario.mec_positions[a])
                .total_cmp(&distance(p, &scenario.mec_positions[b]))
                .then(a.cmp(&b))
        });
        let lam = scenario.arrival_rates[i];
        let j = order
            .into_iter()
            .find(|&j| load[j] + lam < cap)
            .ok_or_else(|| Error::NoStableAssignment(format!("IoT {i} fits on no MEC")))?;
        load[j] += lam;
        z[[i, j, i]] = 1.0;
    }
    Ok(z)
}

/// Shared starting point: k-means UAV positions, nearest-stable association, relay rule at
/// prospective equal-share powers, then an equal power split among each UAV's IoTs.
pub fn initial_point(model: &DelayModel, seed: u64) -> Result<DecisionVariables> {
    let scenario = model.scenario;
    let mut vars = DecisionVariables::zeros(scenario);
    if scenario.num_uavs > 0 {
        vars.positions = scenario.starting_uav_positions(seed)?;
    }
    vars.assoc = nearest_stable_association(scenario)?;
    vars.assoc_slack = vars.assoc.clone();
    let zero = DualState::new(scenario, 1.0, 1.0, 0.5)?;
    solve_sp1(model, &mut vars, &zero, RelayMode::Rule, &PgOptions::default());
    equal_power_split(&mut vars, scenario.uav_tx_power_budget);
    vars.alpha_slack = vars.alpha.clone();
    Ok(vars)
}

/// `P_UAV / n_m` to each of the `n_m` IoTs relayed by UAV `m`.
pub fn equal_power_split(vars: &mut DecisionVariables, budget: f64) {
    let (ni, nm) = vars.alpha.dim();
    for m in 0..nm {
        let n = (0..ni).filter(|&i| vars.alpha[[i, m]] > 0.0).count();
        for i in 0..ni {
            vars.power[[i, m]] = if vars.alpha[[i, m]] > 0.0 { budget / n as f64 } else { 0.0 };
        }
    }
}

/// Runs the block given by `step` on a copy and keeps it only if the objective does not rise.
pub(crate) fn guarded<F>(vars: &mut DecisionVariables, current: &mut f64, objective: impl Fn(&DecisionVariables) -> f64, step: F) -> bool
where
    F: FnOnce(&mut DecisionVariables) -> Result<()>,
{
    let mut cand = vars.clone();
    if step(&mut cand).is_err() {
        return false;
    }
    let value = objective(&cand);
    if value <= *current {
        *vars = cand;
        *current = value;
        true
    } else {
        false
    }
}

/// Diagnostics of one PDD run beyond the report.
#[derive(Debug, Clone, Default)]
pub struct PddStats {
    pub outer_iterations: usize,
    pub inner_sweeps: usize,
    pub placement_warnings: usize,
}

pub fn run_pdd(scenario: &NetworkScenario, config: &PddConfig, seed: u64) -> Result<RunReport> {
    run_pdd_with_stats(scenario, config, seed).map(|(r, _)| r)
}

pub fn run_pdd_with_stats(scenario: &NetworkScenario, config: &PddConfig, seed: u64) -> Result<(RunReport, PddStats)> {
    let started = Instant::now();
    config.validate()?;
    scenario.validate()?;
    let model = DelayModel::new(scenario)?;
    let mut vars = initial_point(&model, seed)?;
    let mut duals = DualState::new(scenario, config.rho_alpha, config.rho_z, config.shrink)?;
    let pg = config.pg();
    let mut stats = PddStats::default();
    let mut objective_trace = Vec::new();
    let mut violation_trace = Vec::new();
    let mut termination = Termination::OuterCapReached;
    for outer in 0..config.max_outer {
        let al = |v: &DecisionVariables| model.al_objective(v, &duals, DelayBound::Upper);
        let mut current = al(&vars);
        let mut trace = vec![current];
        let use_theorems = duals.rho_alpha < config.theorem_rho
            && duals.rho_z < config.theorem_rho
            && assoc_near_binary(&vars, config.binary_band);
        for _ in 0..config.max_inner {
            let previous = current;
            let relay_mode = if use_theorems { RelayMode::Rule } else { RelayMode::Relaxed };
            let power_mode = if use_theorems && assoc_near_binary(&vars, config.binary_band) {
                PowerMode::ClosedForm
            } else {
                PowerMode::Relaxed
            };
            let joint = guarded(&mut vars, &mut current, al, |v| {
                solve_sp1(&model, v, &duals, relay_mode, &pg);
                solve_sp2(&model, v, power_mode, &pg)
            });
            if !joint && relay_mode == RelayMode::Rule {
                let relaxed = guarded(&mut vars, &mut current, al, |v| {
                    solve_sp1(&model, v, &duals, RelayMode::Relaxed, &pg);
                    solve_sp2(&model, v, PowerMode::Relaxed, &pg)
                });
                if !relaxed {
                    guarded(&mut vars, &mut current, al, |v| solve_sp2(&model, v, power_mode, &pg));
                }
            } else if !joint {
                guarded(&mut vars, &mut current, al, |v| solve_sp2(&model, v, power_mode, &pg));
            }
            let mut warnings = 0;
            guarded(&mut vars, &mut current, al, |v| {
                warnings = solve_sp3(&model, v, &pg)?;
                Ok(())
            });
            stats.placement_warnings += warnings;
            guarded(&mut vars, &mut current, al, |v| {
                if solve_sp4(&model, v, &duals, &pg)? {
                    solve_sp2(&model, v, power_mode, &pg)?;
                }
                Ok(())
            });
            trace.push(current);
            stats.inner_sweeps += 1;
            if (previous - current).abs() <= config.eps_inner {
                break;
            }
        }
        objective_trace.push(trace);
        let h = violation(&vars);
        violation_trace.push(h);
        stats.outer_iterations = outer + 1;
        log::debug!(
            "outer {outer}: h = {h:.3e}, rho_alpha = {:.3e}, rho_z = {:.3e}",
            duals.rho_alpha,
            duals.rho_z
        );
        if h <= config.eps_outer {
            termination = Termination::Converged;
            break;
        }
        duals.outer_update(&vars);
    }
    let (rounded, repaired) = round_solution(&model, &vars)?;
    let rounded = finalize_binary(&model, rounded, &pg)?;
    let report = RunReport::assemble(
        &model,
        ReportParts {
            algorithm: "pdd",
            seed,
            termination,
            relaxed: vars,
            rounded,
            objective_trace,
            violation_trace,
            repaired,
            started,
        },
    );
    Ok((report, stats))
}
