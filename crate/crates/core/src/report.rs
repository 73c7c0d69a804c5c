//! Result record shared by the proposed solver and every baseline.

use std::time::Instant;

use serde::{Deserialize, Serialize};

use crate::delay_model::{violation, DecisionVariables, DelayModel};
use crate::queueing::DelayBound;
use crate::scenario::Point3;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Termination {
    /// Violation indicator reached the outer tolerance.
    Converged,
    /// Outer iteration cap reached before the violation tolerance.
    OuterCapReached,
    /// Single-loop method stopped on its objective-change tolerance.
    Stationary,
    /// Single-loop method hit its iteration cap.
    IterationCapReached,
    /// Exhaustive enumeration finished.
    Enumerated,
}

/// One IoT's final decision. Indices are 0-based; `subband` is 1-based.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AssignmentRecord {
    pub iot: usize,
    pub mec: usize,
    pub subband: usize,
    pub relay: Option<usize>,
    pub relay_power_w: f64,
    pub comm_delay_s: f64,
    pub comp_delay_s: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RunReport {
    pub algorithm: String,
    pub seed: u64,
    pub termination: Termination,
    pub converged: bool,
    /// Mean service delay of the binary solution with exact Erlang C.
    pub mean_delay_s: f64,
    /// Same solution with the upper-bound operation delay.
    pub mean_delay_upper_s: f64,
    pub mean_comm_s: f64,
    pub mean_comp_s: f64,
    /// Mean service delay of the relaxed iterate before rounding (exact Erlang C).
    pub relaxed_mean_delay_s: f64,
    pub final_violation: f64,
    pub repaired: bool,
    /// Objective per inner iteration, grouped by outer iteration.
    pub objective_trace: Vec<Vec<f64>>,
    /// Violation indicator after each outer iteration.
    pub violation_trace: Vec<f64>,
    pub assignments: Vec<AssignmentRecord>,
    pub uav_positions: Vec<Point3>,
    pub wall_time_s: f64,
    pub relaxed: DecisionVariables,
    pub rounded: DecisionVariables,
}

pub(crate) struct ReportParts {
    pub algorithm: &'static str,
    pub seed: u64,
    pub termination: Termination,
    pub relaxed: DecisionVariables,
    pub rounded: DecisionVariables,
    pub objective_trace: Vec<Vec<f64>>,
    pub violation_trace: Vec<f64>,
    pub repaired: bool,
    pub started: Instant,
}

impl RunReport {
    pub(crate) fn assemble(model: &DelayModel, parts: ReportParts) -> Self {
        let exact = model.breakdown(&parts.rounded, None, DelayBound::Exact);
        let upper = model.mean_delay(&parts.rounded, DelayBound::Upper);
        let relaxed_mean = model.mean_delay(&parts.relaxed, DelayBound::Exact);
        let v = &parts.rounded;
        let assignments = (0..v.num_iots())
            .filter_map(|i| {
                let (j, u) = v.link_of(i)?;
                let relay = v.relay_of(i);
                Some(AssignmentRecord {
                    iot: i,
                    mec: j,
                    subband: u + 1,
                    relay,
                    relay_power_w: relay.map(|m| v.power[[i, m]]).unwrap_or(0.0),
                    comm_delay_s: exact.comm[i],
                    comp_delay_s: exact.comp[i],
                })
            })
            .collect();
        let converged = matches!(
            parts.termination,
            Termination::Converged | Termination::Stationary | Termination::Enumerated
        );
        RunReport {
            algorithm: parts.algorithm.to_string(),
            seed: parts.seed,
            termination: parts.termination,
            converged,
            mean_delay_s: exact.mean_service_delay,
            mean_delay_upper_s: upper,
            mean_comm_s: exact.mean_comm(),
            mean_comp_s: exact.mean_comp(),
            relaxed_mean_delay_s: relaxed_mean,
            final_violation: violation(&parts.relaxed),
            repaired: parts.repaired,
            objective_trace: parts.objective_trace,
            violation_trace: parts.violation_trace,
            assignments,
            uav_positions: parts.rounded.positions.clone(),
            wall_time_s: parts.started.elapsed().as_secs_f64(),
            relaxed: parts.relaxed,
            rounded: parts.rounded,
        }
    }

    pub fn to_json(&self) -> crate::Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }
}
