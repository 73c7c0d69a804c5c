//! Per-IoT communication, computation and service delays, and the augmented Lagrangian.
//!
//! Sub-band indices are 0-based in this module (`u = 0` is the lowest sub-band).
//! Impossible links evaluate to `+inf`; a zero weight times `+inf` counts as zero.

use ndarray::{Array1, Array2, Array3};
use serde::{Deserialize, Serialize};

use crate::channel::spreading_constant;
use crate::error::{invalid, Result};
use crate::queueing::{delay_derivative, delay_or_inf, DelayBound};
use crate::scenario::{distance, NetworkScenario, Point3};

/// Continuous (relaxed) or binary decision point.
///
/// `assoc[[i, j, u]]` is IoT `i` offloading to MEC `j` on sub-band `u`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DecisionVariables {
    pub alpha: Array2<f64>,
    pub alpha_slack: Array2<f64>,
    pub power: Array2<f64>,
    pub positions: Vec<Point3>,
    pub assoc: Array3<f64>,
    pub assoc_slack: Array3<f64>,
}

impl DecisionVariables {
    pub fn zeros(scenario: &NetworkScenario) -> Self {
        let (i, j, m, u) = dims(scenario);
        Self {
            alpha: Array2::zeros((i, m)),
            alpha_slack: Array2::zeros((i, m)),
            power: Array2::zeros((i, m)),
            positions: vec![[0.0, 0.0, scenario.uav_altitude]; m],
            assoc: Array3::zeros((i, j, u)),
            assoc_slack: Array3::zeros((i, j, u)),
        }
    }

    pub fn num_iots(&self) -> usize {
        self.alpha.nrows()
    }

    pub fn num_uavs(&self) -> usize {
        self.alpha.ncols()
    }

    /// Relay chosen by IoT `i` when its row is binary.
    pub fn relay_of(&self, i: usize) -> Option<usize> {
        (0..self.num_uavs()).find(|&m| self.alpha[[i, m]] > 0.5)
    }

    /// `(j, u)` chosen by IoT `i` when its association is binary.
    pub fn link_of(&self, i: usize) -> Option<(usize, usize)> {
        let (_, nj, nu) = self.assoc.dim();
        (0..nj)
            .flat_map(|j| (0..nu).map(move |u| (j, u)))
            .find(|&(j, u)| self.assoc[[i, j, u]] > 0.5)
    }

    /// Distance of every `alpha` and `z` entry from the nearest of {0, 1}.
    pub fn max_binary_gap(&self) -> f64 {
        self.alpha
            .iter()
            .chain(self.assoc.iter())
            .map(|v| v.min(1.0 - v).abs())
            .fold(0.0, f64::max)
    }

    /// Checks the binary feasibility constraints exactly: binary `alpha` with at most one
    /// relay per IoT, `0 <= P`, per-UAV power budget (with `power_tol` slack), binary `z`
    /// with each sub-band used at most once and each IoT served exactly once.
    pub fn check_binary_feasible(&self, scenario: &NetworkScenario, power_tol: f64) -> std::result::Result<(), String> {
        let (ni, nj, nm, nu) = dims(scenario);
        for v in self.alpha.iter().chain(self.assoc.iter()) {
            if *v != 0.0 && *v != 1.0 {
                return Err(format!("non-binary entry {v}"));
            }
        }
        for i in 0..ni {
            let a: f64 = (0..nm).map(|m| self.alpha[[i, m]]).sum();
            if a > 1.0 {
                return Err(format!("IoT {i} selects {a} relays"));
            }
            let s: f64 = self.assoc.slice(ndarray::s![i, .., ..]).sum();
            if s != 1.0 {
                return Err(format!("IoT {i} has {s} associations"));
            }
        }
        for u in 0..nu {
            let s: f64 = (0..ni).flat_map(|i| (0..nj).map(move |j| (i, j))).map(|(i, j)| self.assoc[[i, j, u]]).sum();
            if s > 1.0 {
                return Err(format!("sub-band {u} used {s} times"));
            }
        }
        for m in 0..nm {
            if (0..ni).any(|i| self.power[[i, m]] < 0.0) {
                return Err(format!("negative power on UAV {m}"));
            }
            let p: f64 = (0..ni).map(|i| self.power[[i, m]]).sum();
            if p > scenario.uav_tx_power_budget + power_tol {
                return Err(format!("UAV {m} power {p} over budget"));
            }
        }
        Ok(())
    }
}

/// Dual variables and penalty parameters of the augmented Lagrangian.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DualState {
    pub eta_alpha1: Array2<f64>,
    pub eta_alpha2: Array2<f64>,
    pub eta_z1: Array3<f64>,
    pub eta_z2: Array3<f64>,
    pub eta_z_u: Array1<f64>,
    pub eta_z_i: Array1<f64>,
    pub rho_alpha: f64,
    pub rho_z: f64,
    pub shrink: f64,
}

impl DualState {
    pub fn new(scenario: &NetworkScenario, rho_alpha: f64, rho_z: f64, shrink: f64) -> Result<Self> {
        if !(rho_alpha > 0.0 && rho_z > 0.0) {
            return Err(invalid("rho", "penalty parameters must be > 0"));
        }
        if !(shrink > 0.0 && shrink < 1.0) {
            return Err(invalid("shrink", format!("must lie in (0, 1), got {shrink}")));
        }
        let (i, j, m, u) = dims(scenario);
        Ok(Self {
            eta_alpha1: Array2::zeros((i, m)),
            eta_alpha2: Array2::zeros((i, m)),
            eta_z1: Array3::zeros((i, j, u)),
            eta_z2: Array3::zeros((i, j, u)),
            eta_z_u: Array1::zeros(u),
            eta_z_i: Array1::zeros(i),
            rho_alpha,
            rho_z,
            shrink,
        })
    }

    /// Multiplier step `eta += residual / rho` on every family, then `rho *= shrink`.
    pub fn outer_update(&mut self, vars: &DecisionVariables) {
        let (ni, nj, nu) = vars.assoc.dim();
        let ra = self.rho_alpha;
        let rz = self.rho_z;
        for ((i, m), a) in vars.alpha.indexed_iter() {
            let at = vars.alpha_slack[[i, m]];
            self.eta_alpha1[[i, m]] += a * (at - 1.0) / ra;
            self.eta_alpha2[[i, m]] += (a - at) / ra;
        }
        for ((i, j, u), z) in vars.assoc.indexed_iter() {
            let zt = vars.assoc_slack[[i, j, u]];
            self.eta_z1[[i, j, u]] += z * (zt - 1.0) / rz;
            self.eta_z2[[i, j, u]] += (z - zt) / rz;
        }
        for u in 0..nu {
            self.eta_z_u[u] += (subband_sum(vars, u) - 1.0) / rz;
        }
        for i in 0..ni {
            self.eta_z_i[i] += (iot_sum(vars, i, nj, nu) - 1.0) / rz;
        }
        self.rho_alpha *= self.shrink;
        self.rho_z *= self.shrink;
    }
}

fn subband_sum(vars: &DecisionVariables, u: usize) -> f64 {
    vars.assoc.slice(ndarray::s![.., .., u]).sum()
}

fn iot_sum(vars: &DecisionVariables, i: usize, _nj: usize, _nu: usize) -> f64 {
    vars.assoc.slice(ndarray::s![i, .., ..]).sum()
}

/// `(I, J, M, U)`.
pub fn dims(scenario: &NetworkScenario) -> (usize, usize, usize, usize) {
    (
        scenario.num_iots(),
        scenario.num_mecs(),
        scenario.num_uavs,
        scenario.num_subbands,
    )
}

/// Per-IoT delays at one decision point.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DelayBreakdown {
    pub comm: Vec<f64>,
    pub comp: Vec<f64>,
    pub serv: Vec<f64>,
    pub mean_service_delay: f64,
    pub penalty: f64,
    pub al_objective: f64,
}

impl DelayBreakdown {
    pub fn mean_comm(&self) -> f64 {
        mean(&self.comm)
    }

    pub fn mean_comp(&self) -> f64 {
        mean(&self.comp)
    }
}

fn mean(v: &[f64]) -> f64 {
    v.iter().sum::<f64>() / v.len().max(1) as f64
}

#[inline]
pub(crate) fn weighted(w: f64, t: f64) -> f64 {
    if w == 0.0 {
        0.0
    } else {
        w * t
    }
}

/// Scenario constants and the direct-link delay table, shared by all solvers.
#[derive(Debug, Clone)]
pub struct DelayModel<'a> {
    pub scenario: &'a NetworkScenario,
    spread: Vec<f64>,
    k: Vec<f64>,
    bn0: f64,
    t_direct: Array3<f64>,
}

/// Hop delays for the UAV positions and powers of one decision point.
#[derive(Debug, Clone)]
pub struct RelayTables {
    /// IoT `i` to UAV `m` on sub-band `u`, `[i, m, u]`.
    pub uplink: Array3<f64>,
    /// UAV `m` to MEC `j` on sub-band `u` at power `P[i, m]`, stored `[[i, m, j, u]]` flattened.
    downlink: Vec<f64>,
    dims: (usize, usize, usize, usize),
}

impl RelayTables {
    pub fn downlink(&self, i: usize, m: usize, j: usize, u: usize) -> f64 {
        let (_, nm, nj, nu) = self.dims;
        self.downlink[((i * nm + m) * nj + j) * nu + u]
    }

    pub fn relay(&self, i: usize, m: usize, j: usize, u: usize) -> f64 {
        self.uplink[[i, m, u]] + self.downlink(i, m, j, u)
    }
}

impl<'a> DelayModel<'a> {
    pub fn new(scenario: &'a NetworkScenario) -> Result<Self> {
        let (ni, nj, _, nu) = dims(scenario);
        let mut spread = Vec::with_capacity(nu);
        let mut k = Vec::with_capacity(nu);
        for u in 1..=nu {
            let f = scenario.subband_frequency(u)?;
            spread.push(spreading_constant(f, scenario.speed_of_light));
            k.push(scenario.absorption.k_at(f)?);
        }
        let zeta = scenario.blockage.zeta();
        let delta = scenario.blockage.delta()?;
        let bn0 = scenario.subband_bandwidth * scenario.noise_density;
        let mut model = Self {
            scenario,
            spread,
            k,
            bn0,
            t_direct: Array3::zeros((ni, nj, nu)),
        };
        for i in 0..ni {
            for j in 0..nj {
                let d = distance(&scenario.iot_positions[i], &scenario.mec_positions[j]);
                let pnb = zeta * (-delta * d).exp();
                for u in 0..nu {
                    let rate = model.rate(d, scenario.iot_tx_power, u) * pnb;
                    model.t_direct[[i, j, u]] = model.time_at_rate(rate);
                }
            }
        }
        Ok(model)
    }

    pub fn num_subbands(&self) -> usize {
        self.k.len()
    }

    /// `B N0`.
    pub fn noise_power(&self) -> f64 {
        self.bn0
    }

    /// `|h|^2 / (B N0)` at distance `d` on sub-band `u`.
    pub fn normalized_gain(&self, d: f64, u: usize) -> f64 {
        let d = d.max(1e-9);
        self.spread[u] * (-self.k[u] * d).exp() / (d * d) / self.bn0
    }

    /// d(normalized gain)/dd.
    pub fn normalized_gain_slope(&self, d: f64, u: usize) -> f64 {
        let d = d.max(1e-9);
        -self.normalized_gain(d, u) * (2.0 / d + self.k[u])
    }

    /// Shannon rate without blockage, bits/s.
    pub fn rate(&self, d: f64, power: f64, u: usize) -> f64 {
        self.scenario.subband_bandwidth * (power * self.normalized_gain(d, u)).ln_1p() / std::f64::consts::LN_2
    }

    fn time_at_rate(&self, rate: f64) -> f64 {
        if rate > 0.0 {
            self.scenario.task_input_size / rate
        } else {
            f64::INFINITY
        }
    }

    /// `D_in / R` for a blockage-free link of length `d` at `power` on sub-band `u`.
    pub fn hop_delay(&self, d: f64, power: f64, u: usize) -> f64 {
        self.time_at_rate(self.rate(d, power, u))
    }

    /// `D_in ln2 / (B ln(1 + P a))` with `a` the normalized gain: derivative in `P`.
    pub fn hop_delay_dpower(&self, d: f64, power: f64, u: usize) -> f64 {
        let a = self.normalized_gain(d, u);
        hop_dx(self, power * a, a)
    }

    /// Derivative of the hop delay in the link length.
    pub fn hop_delay_ddistance(&self, d: f64, power: f64, u: usize) -> f64 {
        let a = self.normalized_gain(d, u);
        hop_dx(self, power * a, power * self.normalized_gain_slope(d, u))
    }

    pub fn direct_delay(&self, i: usize, j: usize, u: usize) -> f64 {
        self.t_direct[[i, j, u]]
    }

    pub fn direct_table(&self) -> &Array3<f64> {
        &self.t_direct
    }

    pub fn uplink_delay(&self, i: usize, q: &Point3, u: usize) -> f64 {
        let d = distance(&self.scenario.iot_positions[i], q);
        self.hop_delay(d, self.scenario.iot_tx_power, u)
    }

    pub fn downlink_delay(&self, q: &Point3, j: usize, power: f64, u: usize) -> f64 {
        let d = distance(q, &self.scenario.mec_positions[j]);
        self.hop_delay(d, power, u)
    }

    /// Direct plus relay delays at the powers and positions in `vars`.
    pub fn relay_delay(&self, i: usize, j: usize, m: usize, u: usize, vars: &DecisionVariables) -> f64 {
        let q = &vars.positions[m];
        self.uplink_delay(i, q, u) + self.downlink_delay(q, j, vars.power[[i, m]], u)
    }

    pub fn relay_tables(&self, vars: &DecisionVariables) -> RelayTables {
        let (ni, nj, nm, nu) = dims(self.scenario);
        let mut uplink = Array3::zeros((ni, nm, nu));
        let mut downlink = vec![0.0; ni * nm * nj * nu];
        for m in 0..nm {
            let q = &vars.positions[m];
            for i in 0..ni {
                for u in 0..nu {
                    uplink[[i, m, u]] = self.uplink_delay(i, q, u);
                }
            }
            for j in 0..nj {
                let d = distance(q, &self.scenario.mec_positions[j]);
                for i in 0..ni {
                    let p = vars.power[[i, m]];
                    for u in 0..nu {
                        downlink[((i * nm + m) * nj + j) * nu + u] = self.hop_delay(d, p, u);
                    }
                }
            }
        }
        RelayTables {
            uplink,
            downlink,
            dims: (ni, nm, nj, nu),
        }
    }

    /// Communication cost of IoT `i` if fully assigned to `(j, u)` with its current `alpha` row.
    pub fn link_cost(&self, tables: &RelayTables, vars: &DecisionVariables, i: usize, j: usize, u: usize) -> f64 {
        let nm = vars.num_uavs();
        let a_sum: f64 = (0..nm).map(|m| vars.alpha[[i, m]]).sum();
        let mut c = weighted((1.0 - a_sum).max(0.0), self.t_direct[[i, j, u]]);
        for m in 0..nm {
            c += weighted(vars.alpha[[i, m]], tables.relay(i, m, j, u));
        }
        c
    }

    /// `[i, j, u]` table of [`DelayModel::link_cost`].
    pub fn link_costs(&self, tables: &RelayTables, vars: &DecisionVariables) -> Array3<f64> {
        let (ni, nj, nu) = vars.assoc.dim();
        Array3::from_shape_fn((ni, nj, nu), |(i, j, u)| self.link_cost(tables, vars, i, j, u))
    }

    pub fn communication_delays(&self, vars: &DecisionVariables) -> Vec<f64> {
        let tables = self.relay_tables(vars);
        self.communication_delays_with(&tables, vars)
    }

    pub fn communication_delays_with(&self, tables: &RelayTables, vars: &DecisionVariables) -> Vec<f64> {
        let (ni, nj, nu) = vars.assoc.dim();
        (0..ni)
            .map(|i| {
                let mut t = 0.0;
                for j in 0..nj {
                    for u in 0..nu {
                        let z = vars.assoc[[i, j, u]];
                        if z != 0.0 {
                            t += weighted(z, self.link_cost(tables, vars, i, j, u));
                        }
                    }
                }
                t
            })
            .collect()
    }

    /// Aggregate arrival rate at every MEC.
    pub fn mec_loads(&self, assoc: &Array3<f64>) -> Vec<f64> {
        let (ni, nj, nu) = assoc.dim();
        let rates = &self.scenario.arrival_rates;
        (0..nj)
            .map(|j| (0..ni).map(|i| rates[i] * (0..nu).map(|u| assoc[[i, j, u]]).sum::<f64>()).sum())
            .collect()
    }

    pub fn computation_delays(&self, assoc: &Array3<f64>, bound: DelayBound) -> Vec<f64> {
        let (ni, nj, _) = assoc.dim();
        let per_mec: Vec<f64> = self
            .mec_loads(assoc)
            .iter()
            .map(|&l| delay_or_inf(bound, &self.scenario.queue, l))
            .collect();
        (0..ni)
            .map(|i| {
                (0..nj)
                    .map(|j| weighted(assoc.slice(ndarray::s![i, j, ..]).sum(), per_mec[j]))
                    .sum()
            })
            .collect()
    }

    /// Sum over IoTs of the computation delay and its gradient in `z`, `[i, j, u]`.
    pub fn computation_sum_and_grad(&self, assoc: &Array3<f64>, bound: DelayBound, grad: Option<&mut Array3<f64>>) -> f64 {
        let (ni, nj, nu) = assoc.dim();
        let queue = &self.scenario.queue;
        let loads = self.mec_loads(assoc);
        let mut total = 0.0;
        let mut n_j = vec![0.0; nj];
        let mut t_j = vec![0.0; nj];
        let mut dt_j = vec![0.0; nj];
        for j in 0..nj {
            n_j[j] = (0..ni).map(|i| assoc.slice(ndarray::s![i, j, ..]).sum()).sum();
            t_j[j] = delay_or_inf(bound, queue, loads[j]);
            total += weighted(n_j[j], t_j[j]);
            dt_j[j] = delay_derivative(bound, queue, loads[j]);
        }
        if let Some(g) = grad {
            for i in 0..ni {
                let lam = self.scenario.arrival_rates[i];
                for j in 0..nj {
                    let v = t_j[j] + weighted(n_j[j], dt_j[j]) * lam;
                    for u in 0..nu {
                        g[[i, j, u]] = v;
                    }
                }
            }
        }
        total
    }

    pub fn breakdown(&self, vars: &DecisionVariables, duals: Option<&DualState>, bound: DelayBound) -> DelayBreakdown {
        let comm = self.communication_delays(vars);
        let comp = self.computation_delays(&vars.assoc, bound);
        let serv: Vec<f64> = comm.iter().zip(&comp).map(|(a, b)| a + b).collect();
        let total: f64 = serv.iter().sum();
        let penalty = duals.map(|d| penalty_value(vars, d)).unwrap_or(0.0);
        DelayBreakdown {
            mean_service_delay: total / serv.len().max(1) as f64,
            al_objective: total + penalty,
            penalty,
            comm,
            comp,
            serv,
        }
    }

    /// `sum_i t_serv,i + Lambda_alpha / (2 rho_alpha) + Lambda_z / (2 rho_z)`.
    pub fn al_objective(&self, vars: &DecisionVariables, duals: &DualState, bound: DelayBound) -> f64 {
        self.breakdown(vars, Some(duals), bound).al_objective
    }

    /// Mean service delay `(1/I) sum_i t_serv,i`.
    pub fn mean_delay(&self, vars: &DecisionVariables, bound: DelayBound) -> f64 {
        self.breakdown(vars, None, bound).mean_service_delay
    }
}

fn hop_dx(model: &DelayModel, snr: f64, dsnr: f64) -> f64 {
    let l = snr.ln_1p();
    let s = model.scenario;
    if l <= 0.0 {
        return f64::NEG_INFINITY;
    }
    -s.task_input_size * std::f64::consts::LN_2 * dsnr / (s.subband_bandwidth * (1.0 + snr) * l * l)
}

/// `Lambda_alpha` term of one `(i, m)` pair.
pub fn alpha_penalty_term(a: f64, at: f64, rho: f64, e1: f64, e2: f64) -> f64 {
    (a * (at - 1.0) + rho * e1).powi(2) + (a - at + rho * e2).powi(2)
}

pub fn lambda_alpha(vars: &DecisionVariables, duals: &DualState) -> f64 {
    vars.alpha
        .indexed_iter()
        .map(|((i, m), &a)| {
            alpha_penalty_term(
                a,
                vars.alpha_slack[[i, m]],
                duals.rho_alpha,
                duals.eta_alpha1[[i, m]],
                duals.eta_alpha2[[i, m]],
            )
        })
        .sum()
}

pub fn lambda_z(vars: &DecisionVariables, duals: &DualState) -> f64 {
    let (ni, nj, nu) = vars.assoc.dim();
    let rho = duals.rho_z;
    let mut total: f64 = vars
        .assoc
        .indexed_iter()
        .map(|((i, j, u), &z)| alpha_penalty_term(z, vars.assoc_slack[[i, j, u]], rho, duals.eta_z1[[i, j, u]], duals.eta_z2[[i, j, u]]))
        .sum();
    for u in 0..nu {
        total += (subband_sum(vars, u) - 1.0 + rho * duals.eta_z_u[u]).powi(2);
    }
    for i in 0..ni {
        total += (iot_sum(vars, i, nj, nu) - 1.0 + rho * duals.eta_z_i[i]).powi(2);
    }
    total
}

pub fn penalty_value(vars: &DecisionVariables, duals: &DualState) -> f64 {
    lambda_alpha(vars, duals) / (2.0 * duals.rho_alpha) + lambda_z(vars, duals) / (2.0 * duals.rho_z)
}

/// Closed-form slack minimizer `(x^2 + (1 - rho e1) x + rho e2) / (x^2 + 1)`.
pub fn slack_update(x: f64, rho: f64, e1: f64, e2: f64) -> f64 {
    (x * x + (1.0 - rho * e1) * x + rho * e2) / (x * x + 1.0)
}

/// Largest constraint residual: binary and slack-coupling terms of `alpha` and `z`, and the
/// per-sub-band and per-IoT association sums.
pub fn violation(vars: &DecisionVariables) -> f64 {
    let (ni, nj, nu) = vars.assoc.dim();
    let mut h = 0.0f64;
    for ((i, m), &a) in vars.alpha.indexed_iter() {
        let at = vars.alpha_slack[[i, m]];
        h = h.max((a * (at - 1.0)).abs()).max((a - at).abs());
    }
    for ((i, j, u), &z) in vars.assoc.indexed_iter() {
        let zt = vars.assoc_slack[[i, j, u]];
        h = h.max((z * (zt - 1.0)).abs()).max((z - zt).abs());
    }
    for u in 0..nu {
        h = h.max((subband_sum(vars, u) - 1.0).abs());
    }
    for i in 0..ni {
        h = h.max((iot_sum(vars, i, nj, nu) - 1.0).abs());
    }
    h
}
