use std::cmp::Ordering;

use crate::error::{invalid, Result};

/// How a weighted group sum is constrained.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SumKind {
    AtMost,
    Equal,
}

#[derive(Debug, Clone)]
pub struct SumGroup {
    pub indices: Vec<usize>,
    pub weights: Vec<f64>,
    pub kind: SumKind,
    pub target: f64,
}

/// Box `lower <= x <= upper` intersected with disjoint weighted sum constraints.
#[derive(Debug, Clone)]
pub struct BoxSimplexFeasibleSet {
    lower: Vec<f64>,
    upper: Vec<f64>,
    groups: Vec<SumGroup>,
    owner: Vec<Option<usize>>,
}

/// Relative slack under which a point already counts as satisfying a group constraint.
/// Keeps projection idempotent in floating point.
const ACCEPT_TOL: f64 = 1e-12;

impl BoxSimplexFeasibleSet {
    pub fn new(lower: Vec<f64>, upper: Vec<f64>) -> Result<Self> {
        if lower.len() != upper.len() {
            return Err(invalid("bounds", "lower and upper differ in length"));
        }
        for (k, (l, u)) in lower.iter().zip(&upper).enumerate() {
            if !(l <= u) || l.is_nan() || u.is_nan() {
                return Err(invalid("bounds", format!("coordinate {k}: lower {l} > upper {u}")));
            }
        }
        let n = lower.len();
        Ok(Self {
            lower,
            upper,
            groups: Vec::new(),
            owner: vec![None; n],
        })
    }

    pub fn uniform(n: usize, lower: f64, upper: f64) -> Result<Self> {
        Self::new(vec![lower; n], vec![upper; n])
    }

    pub fn dim(&self) -> usize {
        self.lower.len()
    }

    pub fn lower(&self) -> &[f64] {
        &self.lower
    }

    pub fn upper(&self) -> &[f64] {
        &self.upper
    }

    pub fn groups(&self) -> &[SumGroup] {
        &self.groups
    }

    /// Adds `sum_k w_k x_k (<= | =) target` over `indices`; `weights = None` means unit weights.
    pub fn with_group(
        mut self,
        indices: Vec<usize>,
        weights: Option<Vec<f64>>,
        kind: SumKind,
        target: f64,
    ) -> Result<Self> {
        let weights = weights.unwrap_or_else(|| vec![1.0; indices.len()]);
        if weights.len() != indices.len() {
            return Err(invalid("group", "weights and indices differ in length"));
        }
        if weights.iter().any(|w| !(*w > 0.0 && w.is_finite())) {
            return Err(invalid("group", "weights must be positive and finite"));
        }
        let gid = self.groups.len();
        for &k in &indices {
            if k >= self.dim() {
                return Err(invalid("group", format!("index {k} out of range")));
            }
            if self.owner[k].is_some() {
                return Err(invalid("group", format!("index {k} belongs to two groups")));
            }
        }
        let lo: f64 = indices.iter().zip(&weights).map(|(&k, w)| w * self.lower[k]).sum();
        let hi: f64 = indices.iter().zip(&weights).map(|(&k, w)| w * self.upper[k]).sum();
        let slack = ACCEPT_TOL * target.abs().max(1.0);
        let ok = match kind {
            SumKind::AtMost => lo <= target + slack,
            SumKind::Equal => lo <= target + slack && target <= hi + slack,
        };
        if !ok {
            return Err(invalid("group", format!("target {target} unreachable within bounds [{lo}, {hi}]")));
        }
        for &k in &indices {
            self.owner[k] = Some(gid);
        }
        self.groups.push(SumGroup {
            indices,
            weights,
            kind,
            target,
        });
        Ok(self)
    }

    pub fn project(&self, y: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; y.len()];
        self.project_into(y, &mut out);
        out
    }

    /// Euclidean projection of `y` into `out`.
    pub fn project_into(&self, y: &[f64], out: &mut [f64]) {
        assert_eq!(y.len(), self.dim());
        for k in 0..y.len() {
            out[k] = y[k].clamp(self.lower[k], self.upper[k]);
        }
        let mut buf = Vec::new();
        for g in &self.groups {
            project_group(g, y, &self.lower, &self.upper, out, &mut buf);
        }
    }

    /// Whether `x` lies in the set up to `tol` (absolute on bounds, scaled on sums).
    pub fn contains(&self, x: &[f64], tol: f64) -> bool {
        if x.len() != self.dim() {
            return false;
        }
        for k in 0..x.len() {
            if !(x[k] >= self.lower[k] - tol && x[k] <= self.upper[k] + tol) {
                return false;
            }
        }
        self.groups.iter().all(|g| {
            let s: f64 = g.indices.iter().zip(&g.weights).map(|(&k, w)| w * x[k]).sum();
            let slack = tol * g.target.abs().max(1.0);
            match g.kind {
                SumKind::AtMost => s <= g.target + slack,
                SumKind::Equal => (s - g.target).abs() <= slack,
            }
        })
    }
}

#[derive(Clone, Copy)]
struct Event {
    theta: f64,
    enter: bool,
    slot: usize,
}

/// Solves `min ||x - y||^2` on one group by sweeping the sorted breakpoints of
/// `phi(theta) = sum w_k clip(y_k - theta w_k)`, which is piecewise linear and non-increasing.
fn project_group(g: &SumGroup, y: &[f64], lo: &[f64], hi: &[f64], out: &mut [f64], events: &mut Vec<Event>) {
    let clipped: f64 = g.indices.iter().zip(&g.weights).map(|(&k, w)| w * out[k]).sum();
    let slack = ACCEPT_TOL * g.target.abs().max(1.0);
    let satisfied = match g.kind {
        SumKind::AtMost => clipped <= g.target + slack,
        SumKind::Equal => (clipped - g.target).abs() <= slack,
    };
    if satisfied {
        return;
    }
    events.clear();
    for (slot, (&k, &w)) in g.indices.iter().zip(&g.weights).enumerate() {
        events.push(Event {
            theta: (y[k] - hi[k]) / w,
            enter: true,
            slot,
        });
        events.push(Event {
            theta: (y[k] - lo[k]) / w,
            enter: false,
            slot,
        });
    }
    events.sort_by(|a, b| {
        a.theta
            .partial_cmp(&b.theta)
            .unwrap_or(Ordering::Equal)
            .then(b.enter.cmp(&a.enter))
            .then(a.slot.cmp(&b.slot))
    });
    let b = g.target;
    let mut c: f64 = g.indices.iter().zip(&g.weights).map(|(&k, w)| w * hi[k]).sum();
    let mut s = 0.0;
    let mut theta = events.last().map(|e| e.theta).unwrap_or(0.0);
    for e in events.iter() {
        let phi = c + s * e.theta;
        if phi <= b {
            theta = if s < 0.0 { ((b - c) / s).min(e.theta) } else { e.theta };
            break;
        }
        let k = g.indices[e.slot];
        let w = g.weights[e.slot];
        if e.enter {
            c += w * (y[k] - hi[k]);
            s -= w * w;
        } else {
            c += w * (lo[k] - y[k]);
            s += w * w;
        }
    }
    for (&k, &w) in g.indices.iter().zip(&g.weights) {
        out[k] = (y[k] - theta * w).clamp(lo[k], hi[k]);
    }
}
