//! M/M/s operation delay at an MEC server.
//!
//! Erlang C is evaluated through the Erlang B recursion
//! `B(0) = 1, B(k) = a B(k-1) / (k + a B(k-1))` with offered load `a = s rho`,
//! then `C = s B / (s - a (1 - B))`. The recursion never forms `a^s / s!`, so it
//! stays finite for large `s`.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::scenario::QueueParams;

/// Margin kept between any MEC load iterate and the pole at `s mu`.
pub const STABILITY_MARGIN: f64 = 1e-6;

/// Exact operation delay or its tractable upper bound.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum DelayBound {
    #[default]
    Exact,
    Upper,
}

/// Aggregate load on one server.
#[derive(Debug, Clone, Copy)]
pub struct ServerLoad {
    pub total_arrival_rate: f64,
    pub queue: QueueParams,
}

impl ServerLoad {
    pub fn intensity(&self) -> f64 {
        self.total_arrival_rate / self.queue.capacity()
    }

    pub fn is_stable(&self) -> bool {
        self.total_arrival_rate < self.queue.capacity()
    }
}

fn erlang_b(s: usize, a: f64) -> f64 {
    let mut b = 1.0;
    for k in 1..=s {
        b = a * b / (k as f64 + a * b);
    }
    b
}

/// Probability that an arriving task waits, for `s` servers at intensity `rho`.
pub fn erlang_c(s: usize, rho: f64) -> Result<f64> {
    if s == 0 {
        return Err(Error::Domain("need at least one server".into()));
    }
    if !(rho >= 0.0) {
        return Err(Error::Domain(format!("traffic intensity must be >= 0, got {rho}")));
    }
    if rho >= 1.0 {
        return Err(Error::Unstable {
            lambda: rho,
            capacity: 1.0,
        });
    }
    Ok(erlang_c_unchecked(s, rho))
}

fn erlang_c_unchecked(s: usize, rho: f64) -> f64 {
    let a = s as f64 * rho;
    let b = erlang_b(s, a);
    let sf = s as f64;
    sf * b / (sf - a * (1.0 - b))
}

/// `dC/da` at offered load `a = lambda / mu`.
fn erlang_c_da(s: usize, a: f64) -> f64 {
    let sf = s as f64;
    if a == 0.0 {
        return if s == 1 { 1.0 } else { 0.0 };
    }
    let b = erlang_b(s, a);
    let db = b * (sf / a - 1.0 + b);
    let den = sf - a + a * b;
    (sf * db * den - sf * b * (-1.0 + b + a * db)) / (den * den)
}

fn check_load(s: usize, mu: f64, lambda: f64) -> Result<()> {
    if !(mu > 0.0) {
        return Err(Error::Domain(format!("service rate must be > 0, got {mu}")));
    }
    if !(lambda >= 0.0) {
        return Err(Error::Domain(format!("arrival rate must be >= 0, got {lambda}")));
    }
    let capacity = s as f64 * mu;
    if lambda >= capacity {
        return Err(Error::Unstable { lambda, capacity });
    }
    Ok(())
}

/// Mean waiting-plus-service time `C(s, lambda/mu) / (s mu - lambda) + 1/mu`.
pub fn operation_delay(s: usize, mu: f64, lambda: f64) -> Result<f64> {
    if s == 0 {
        return Err(Error::Domain("need at least one server".into()));
    }
    check_load(s, mu, lambda)?;
    Ok(exact_delay(s, mu, lambda))
}

fn exact_delay(s: usize, mu: f64, lambda: f64) -> f64 {
    let cap = s as f64 * mu;
    erlang_c_unchecked(s, lambda / cap) / (cap - lambda) + 1.0 / mu
}

/// Upper bound `(lambda / (s mu))^sqrt(s) / (s mu - lambda) + 1/mu`, valid for `s >= 2`.
pub fn operation_delay_upper(s: usize, mu: f64, lambda: f64) -> Result<f64> {
    if s < 2 {
        return Err(Error::BoundInapplicable(s));
    }
    check_load(s, mu, lambda)?;
    Ok(upper_delay(s, mu, lambda))
}

fn upper_delay(s: usize, mu: f64, lambda: f64) -> f64 {
    let cap = s as f64 * mu;
    (lambda / cap).powf((s as f64).sqrt()) / (cap - lambda) + 1.0 / mu
}

/// Solver-mode delay: `+inf` once the load leaves the stable region.
pub fn delay_or_inf(bound: DelayBound, queue: &QueueParams, lambda: f64) -> f64 {
    let s = queue.computing_units;
    let mu = queue.unit_service_rate;
    if !(lambda < queue.capacity()) || lambda < 0.0 {
        return f64::INFINITY;
    }
    match bound {
        DelayBound::Exact => exact_delay(s, mu, lambda),
        DelayBound::Upper => upper_delay(s, mu, lambda),
    }
}

/// Derivative of the delay with respect to the arrival rate (finite loads only).
pub fn delay_derivative(bound: DelayBound, queue: &QueueParams, lambda: f64) -> f64 {
    let s = queue.computing_units;
    let mu = queue.unit_service_rate;
    let cap = queue.capacity();
    if !(lambda < cap) {
        return f64::INFINITY;
    }
    let gap = cap - lambda;
    match bound {
        DelayBound::Exact => {
            let a = lambda / mu;
            let c = erlang_c_unchecked(s, lambda / cap);
            erlang_c_da(s, a) / mu / gap + c / (gap * gap)
        }
        DelayBound::Upper => {
            let r = (s as f64).sqrt();
            let x = lambda / cap;
            let dx = if lambda == 0.0 {
                0.0
            } else {
                r * x.powf(r - 1.0) / cap
            };
            dx / gap + x.powf(r) / (gap * gap)
        }
    }
}

/// Stability margin check per MEC: `lambda_j < s mu - STABILITY_MARGIN`.
pub fn is_stable(loads: &[f64], queue: &QueueParams) -> Vec<bool> {
    let cap = queue.capacity() - STABILITY_MARGIN;
    loads.iter().map(|&l| l < cap).collect()
}
