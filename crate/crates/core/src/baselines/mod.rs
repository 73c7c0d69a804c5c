//! Comparison schemes: UAV-only (UO), association-only (UAO), no-relay SCA (NR-SCA),
//! UAV optimization with a genetic association search (UO-GUAO), single-loop BCD-SCA, and
//! the quantized exhaustive search.

mod exhaustive;
mod ga;
mod sca;

use std::time::Instant;

use serde::{Deserialize, Serialize};

use crate::delay_model::{violation, DecisionVariables, DelayModel, DualState};
use crate::error::{invalid, Result};
use crate::numerics::PgOptions;
use crate::pdd::{
    equal_power_split, guarded, initial_point, round_solution, solve_sp1, solve_sp2, solve_sp3, PowerMode,
    RelayMode,
};
use crate::queueing::DelayBound;
use crate::report::{ReportParts, RunReport, Termination};
use crate::scenario::{distance, NetworkScenario};

pub use exhaustive::{enumeration_count, run_exhaustive, QuantizationGrid, DEFAULT_ENUMERATION_CAP};
pub use ga::{genetic_association, GaConfig};
pub use sca::sca_association;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct BaselineConfig {
    /// Stop once a sweep changes the mean delay by at most this much.
    pub eps: f64,
    pub max_iter: usize,
    /// Step of the association linearization, before backtracking.
    pub sca_damping: f64,
    pub sca_max_iter: usize,
    pub sca_tol: f64,
    /// Alternations between the UAV blocks and the genetic search.
    pub ga_rounds: usize,
    pub ga: GaConfig,
    pub pg_tol: f64,
    pub pg_max_iter: usize,
}

impl Default for BaselineConfig {
    fn default() -> Self {
        Self {
            eps: 1e-4,
            max_iter: 50,
            sca_damping: 0.5,
            sca_max_iter: 100,
            sca_tol: 1e-6,
            ga_rounds: 3,
            ga: GaConfig::default(),
            pg_tol: 1e-9,
            pg_max_iter: 200,
        }
    }
}

impl BaselineConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.eps > 0.0 && self.sca_tol > 0.0) {
            return Err(invalid("eps", "tolerances must be > 0"));
        }
        if !(self.sca_damping > 0.0 && self.sca_damping <= 1.0) {
            return Err(invalid("sca_damping", "must lie in (0, 1]"));
        }
        if self.max_iter == 0 || self.sca_max_iter == 0 || self.pg_max_iter == 0 {
            return Err(invalid("max_iter", "iteration caps must be >= 1"));
        }
        self.ga.validate()
    }

    fn pg(&self) -> PgOptions {
        PgOptions {
            tol: self.pg_tol,
            max_iter: self.pg_max_iter,
            ..PgOptions::default()
        }
    }
}

fn exact<'a>(model: &'a DelayModel<'a>) -> impl Fn(&DecisionVariables) -> f64 + 'a {
    move |v| model.mean_delay(v, DelayBound::Exact)
}

/// Relay rule with closed-form powers, then placement, then powers again; each step kept
/// only if the exact mean delay does not rise.
fn uav_blocks(model: &DelayModel, vars: &mut DecisionVariables, current: &mut f64, pg: &PgOptions) -> Result<()> {
    let zero = DualState::new(model.scenario, 1.0, 1.0, 0.5)?;
    let f = exact(model);
    guarded(vars, current, &f, |v| {
        solve_sp1(model, v, &zero, RelayMode::Rule, pg);
        solve_sp2(model, v, PowerMode::ClosedForm, pg)
    });
    guarded(vars, current, &f, |v| solve_sp3(model, v, pg).map(|_| ()));
    guarded(vars, current, &f, |v| solve_sp2(model, v, PowerMode::ClosedForm, pg));
    Ok(())
}

/// Block sweeps until the mean delay settles; returns the per-sweep trace and whether the
/// tolerance was met.
fn iterate<F>(config: &BaselineConfig, vars: &mut DecisionVariables, current: &mut f64, mut sweep: F) -> Result<(Vec<f64>, bool)>
where
    F: FnMut(&mut DecisionVariables, &mut f64) -> Result<()>,
{
    let mut trace = vec![*current];
    for _ in 0..config.max_iter {
        let previous = *current;
        sweep(vars, current)?;
        trace.push(*current);
        if (previous - *current).abs() <= config.eps {
            return Ok((trace, true));
        }
    }
    Ok((trace, false))
}

fn finish(
    model: &DelayModel,
    algorithm: &'static str,
    seed: u64,
    started: Instant,
    relaxed: DecisionVariables,
    rounded: DecisionVariables,
    trace: Vec<f64>,
    settled: bool,
    repaired: bool,
) -> RunReport {
    let termination = if settled {
        Termination::Stationary
    } else {
        Termination::IterationCapReached
    };
    let h = violation(&rounded);
    RunReport::assemble(
        model,
        ReportParts {
            algorithm,
            seed,
            termination,
            relaxed,
            rounded,
            objective_trace: vec![trace],
            violation_trace: vec![h],
            repaired,
            started,
        },
    )
}

/// Relaxed association step followed by rounding, with `alpha`, `P` and `q` held.
fn association_step(model: &DelayModel, vars: &mut DecisionVariables, bound: DelayBound, config: &BaselineConfig) -> Result<bool> {
    let (relaxed, _) = sca_association(model, vars, bound, config.sca_damping, config.sca_max_iter, config.sca_tol)?;
    let mut cand = vars.clone();
    cand.assoc = relaxed;
    let (rounded, repaired) = round_solution(model, &cand)?;
    vars.assoc = rounded.assoc;
    vars.assoc_slack = vars.assoc.clone();
    Ok(repaired)
}

/// UAV-side optimization only: the association stays at the greedy nearest-stable-MEC one.
pub fn run_uo(scenario: &NetworkScenario, config: &BaselineConfig, seed: u64) -> Result<RunReport> {
    let started = Instant::now();
    config.validate()?;
    scenario.validate()?;
    let model = DelayModel::new(scenario)?;
    let pg = config.pg();
    let mut vars = initial_point(&model, seed)?;
    let mut current = model.mean_delay(&vars, DelayBound::Exact);
    let (trace, settled) = iterate(config, &mut vars, &mut current, |v, c| uav_blocks(&model, v, c, &pg))?;
    Ok(finish(&model, "uo", seed, started, vars.clone(), vars, trace, settled, false))
}

/// Relay row of the distance heuristic: the nearest UAV if it is closer than the IoT's MEC.
fn distance_relays(scenario: &NetworkScenario, vars: &mut DecisionVariables) {
    vars.alpha.fill(0.0);
    for i in 0..vars.num_iots() {
        let Some((j, _)) = vars.link_of(i) else { continue };
        let p = &scenario.iot_positions[i];
        let to_mec = distance(p, &scenario.mec_positions[j]);
        let nearest = (0..scenario.num_uavs)
            .map(|m| (m, distance(p, &vars.positions[m])))
            .min_by(|a, b| a.1.total_cmp(&b.1).then(a.0.cmp(&b.0)));
        if let Some((m, d)) = nearest {
            if to_mec > d {
                vars.alpha[[i, m]] = 1.0;
            }
        }
    }
    vars.alpha_slack = vars.alpha.clone();
}

/// Association optimization only: relays by the distance heuristic, equal power split,
/// UAVs held at their k-means positions.
pub fn run_uao(scenario: &NetworkScenario, config: &BaselineConfig, seed: u64) -> Result<RunReport> {
    let started = Instant::now();
    config.validate()?;
    scenario.validate()?;
    let model = DelayModel::new(scenario)?;
    let budget = scenario.uav_tx_power_budget;
    let mut vars = initial_point(&model, seed)?;
    distance_relays(scenario, &mut vars);
    equal_power_split(&mut vars, budget);
    let mut current = model.mean_delay(&vars, DelayBound::Exact);
    let mut repaired = false;
    let f = exact(&model);
    let (trace, settled) = iterate(config, &mut vars, &mut current, |v, c| {
        guarded(v, c, &f, |w| {
            repaired |= association_step(&model, w, DelayBound::Upper, config)?;
            distance_relays(scenario, w);
            equal_power_split(w, budget);
            Ok(())
        });
        Ok(())
    })?;
    Ok(finish(&model, "uao", seed, started, vars.clone(), vars, trace, settled, repaired))
}

/// Direct links only, association by successive linearization of the exact objective.
pub fn run_nr_sca(scenario: &NetworkScenario, config: &BaselineConfig, seed: u64) -> Result<RunReport> {
    let started = Instant::now();
    config.validate()?;
    scenario.validate()?;
    let model = DelayModel::new(scenario)?;
    let mut vars = initial_point(&model, seed)?;
    vars.alpha.fill(0.0);
    vars.alpha_slack.fill(0.0);
    vars.power.fill(0.0);
    let (relaxed_z, trace) = sca_association(
        &model,
        &vars,
        DelayBound::Exact,
        config.sca_damping,
        config.sca_max_iter,
        config.sca_tol,
    )?;
    let settled = trace.len() <= config.sca_max_iter;
    let mut relaxed = vars.clone();
    relaxed.assoc = relaxed_z;
    let (mut rounded, repaired) = round_solution(&model, &relaxed)?;
    // The rounded point never does worse than the starting association.
    if model.mean_delay(&rounded, DelayBound::Exact) > model.mean_delay(&vars, DelayBound::Exact) {
        rounded = vars;
    }
    Ok(finish(&model, "nr-sca", seed, started, relaxed, rounded, trace, settled, repaired))
}

/// UAV blocks alternated with a genetic search over the binary association.
pub fn run_uo_guao(scenario: &NetworkScenario, config: &BaselineConfig, seed: u64) -> Result<RunReport> {
    let started = Instant::now();
    config.validate()?;
    scenario.validate()?;
    let model = DelayModel::new(scenario)?;
    let pg = config.pg();
    let mut vars = initial_point(&model, seed)?;
    let mut current = model.mean_delay(&vars, DelayBound::Exact);
    let (mut trace, mut settled) = iterate(config, &mut vars, &mut current, |v, c| uav_blocks(&model, v, c, &pg))?;
    let f = exact(&model);
    for round in 0..config.ga_rounds {
        let before = current;
        guarded(&mut vars, &mut current, &f, |v| {
            v.assoc = genetic_association(&model, v, &config.ga, seed.wrapping_add(round as u64))?;
            v.assoc_slack = v.assoc.clone();
            solve_sp2(&model, v, PowerMode::ClosedForm, &pg)
        });
        trace.push(current);
        let (more, ok) = iterate(config, &mut vars, &mut current, |v, c| uav_blocks(&model, v, c, &pg))?;
        trace.extend(&more[1..]);
        settled = ok;
        if (before - current).abs() <= config.eps {
            break;
        }
    }
    Ok(finish(&model, "uo-guao", seed, started, vars.clone(), vars, trace, settled, false))
}

/// Single-loop block coordinate descent: relay rule, closed-form power, placement and a
/// linearized association step per sweep, with no multipliers or penalties.
pub fn run_bcd_sca(scenario: &NetworkScenario, config: &BaselineConfig, seed: u64) -> Result<RunReport> {
    let started = Instant::now();
    config.validate()?;
    scenario.validate()?;
    let model = DelayModel::new(scenario)?;
    let pg = config.pg();
    let mut vars = initial_point(&model, seed)?;
    let mut current = model.mean_delay(&vars, DelayBound::Exact);
    let mut repaired = false;
    let f = exact(&model);
    let (trace, settled) = iterate(config, &mut vars, &mut current, |v, c| {
        uav_blocks(&model, v, c, &pg)?;
        guarded(v, c, &f, |w| {
            repaired |= association_step(&model, w, DelayBound::Exact, config)?;
            solve_sp2(&model, w, PowerMode::ClosedForm, &pg)
        });
        Ok(())
    })?;
    Ok(finish(&model, "bcd-sca", seed, started, vars.clone(), vars, trace, settled, repaired))
}
