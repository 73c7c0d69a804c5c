//! Network scenarios: topology, physical parameters, random generation,
//! JSON persistence and k-means UAV initialization.

use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::channel::{self, Absorption};
use crate::error::{invalid, Error, Result};

pub const SPEED_OF_LIGHT: f64 = 299_792_458.0;

pub type Point3 = [f64; 3];

pub fn distance(a: &Point3, b: &Point3) -> f64 {
    let dx = a[0] - b[0];
    let dy = a[1] - b[1];
    let dz = a[2] - b[2];
    (dx * dx + dy * dy + dz * dz).sqrt()
}

/// Per-MEC M/M/s server: `s` identical computing units of rate `mu`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct QueueParams {
    pub computing_units: usize,
    pub unit_service_rate: f64,
}

impl QueueParams {
    pub fn capacity(&self) -> f64 {
        self.computing_units as f64 * self.unit_service_rate
    }

    pub fn validate(&self) -> Result<()> {
        if self.computing_units < 2 {
            return Err(invalid(
                "computing_units",
                format!("need s >= 2, got {}", self.computing_units),
            ));
        }
        if !(self.unit_service_rate > 0.0 && self.unit_service_rate.is_finite()) {
            return Err(invalid("unit_service_rate", "must be > 0"));
        }
        Ok(())
    }
}

/// Random cylindrical blockers on the ground plane.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BlockageParams {
    pub blocker_height: f64,
    pub blocker_radius: f64,
    pub density: f64,
    pub mec_height: f64,
    pub iot_height: f64,
}

impl BlockageParams {
    pub fn table1() -> Self {
        Self {
            blocker_height: 1.7,
            blocker_radius: 0.3,
            density: 0.2,
            mec_height: 3.0,
            iot_height: 0.3,
        }
    }

    pub fn zeta(&self) -> f64 {
        (-2.0 * self.density * self.blocker_radius * self.blocker_radius).exp()
    }

    pub fn delta(&self) -> Result<f64> {
        let span = self.mec_height - self.iot_height;
        if span == 0.0 {
            return Err(Error::Degenerate("MEC and IoT heights coincide".into()));
        }
        Ok(2.0 * self.density * self.blocker_radius * (self.blocker_height - self.iot_height) / span)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.density >= 0.0) {
            return Err(invalid("density", "blocker density must be >= 0"));
        }
        if !(self.blocker_radius >= 0.0) {
            return Err(invalid("blocker_radius", "must be >= 0"));
        }
        if !(self.iot_height < self.blocker_height && self.blocker_height < self.mec_height) {
            return Err(invalid(
                "blocker_height",
                "geometry requires iot_height < blocker_height < mec_height",
            ));
        }
        Ok(())
    }
}

/// Immutable network topology and physical parameters.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "ScenarioFile", into = "ScenarioFile")]
pub struct NetworkScenario {
    pub iot_positions: Vec<Point3>,
    pub mec_positions: Vec<Point3>,
    pub num_uavs: usize,
    pub uav_altitude: f64,
    /// Side of the square deployment area; UAV x/y stay in `[0, area_side]`.
    pub area_side: f64,
    pub initial_uav_positions: Option<Vec<Point3>>,
    pub arrival_rates: Vec<f64>,
    pub task_input_size: f64,
    pub iot_tx_power: f64,
    pub uav_tx_power_budget: f64,
    pub base_frequency: f64,
    pub subband_bandwidth: f64,
    pub num_subbands: usize,
    pub noise_density: f64,
    pub speed_of_light: f64,
    /// Recorded for reference; no solver enforces it.
    pub delay_threshold: Option<f64>,
    pub queue: QueueParams,
    pub blockage: BlockageParams,
    pub absorption: Absorption,
}

impl NetworkScenario {
    pub fn num_iots(&self) -> usize {
        self.iot_positions.len()
    }

    pub fn num_mecs(&self) -> usize {
        self.mec_positions.len()
    }

    /// Center frequency of sub-band `u` (1-based).
    pub fn subband_frequency(&self, u: usize) -> Result<f64> {
        if u == 0 || u > self.num_subbands {
            return Err(Error::IndexOutOfRange {
                index: u,
                max: self.num_subbands,
            });
        }
        channel::subband_center_frequency(u, self.base_frequency, self.subband_bandwidth)
    }

    pub fn total_arrival_rate(&self) -> f64 {
        self.arrival_rates.iter().sum()
    }

    pub fn validate(&self) -> Result<()> {
        let i = self.num_iots();
        if i == 0 {
            return Err(invalid("iots", "need at least one IoT"));
        }
        if self.num_mecs() == 0 {
            return Err(invalid("mecs", "need at least one MEC"));
        }
        if self.arrival_rates.len() != i {
            return Err(invalid(
                "arrival_rates",
                format!("{} rates for {} IoTs", self.arrival_rates.len(), i),
            ));
        }
        if let Some(bad) = self.arrival_rates.iter().find(|&&l| !(l > 0.0 && l.is_finite())) {
            return Err(invalid("arrival_rates", format!("rates must be > 0, got {bad}")));
        }
        let positive = [
            ("task_input_size_bits", self.task_input_size),
            ("iot_tx_power_w", self.iot_tx_power),
            ("uav_tx_power_budget_w", self.uav_tx_power_budget),
            ("subband_bandwidth_hz", self.subband_bandwidth),
            ("noise_density_w_per_hz", self.noise_density),
            ("altitude_m", self.uav_altitude),
            ("area_side_m", self.area_side),
            ("base_frequency_hz", self.base_frequency),
            ("speed_of_light_m_per_s", self.speed_of_light),
        ];
        for (name, v) in positive {
            if !(v > 0.0 && v.is_finite()) {
                return Err(invalid(name, format!("must be > 0, got {v}")));
            }
        }
        if self.num_subbands < i {
            return Err(Error::InsufficientSubbands {
                subbands: self.num_subbands,
                iots: i,
            });
        }
        self.queue.validate()?;
        self.blockage.validate()?;
        self.absorption.validate()?;
        for u in 1..=self.num_subbands {
            self.absorption.k_at(self.subband_frequency(u)?)?;
        }
        let total = self.total_arrival_rate();
        let capacity = self.num_mecs() as f64 * self.queue.capacity();
        if total >= capacity {
            return Err(Error::StabilityInfeasible { total, capacity });
        }
        if let Some(q) = &self.initial_uav_positions {
            if q.len() != self.num_uavs {
                return Err(invalid(
                    "initial_positions",
                    format!("{} positions for {} UAVs", q.len(), self.num_uavs),
                ));
            }
        }
        Ok(())
    }

    /// UAV starting positions: the stored ones when present, else k-means.
    pub fn starting_uav_positions(&self, seed: u64) -> Result<Vec<Point3>> {
        match &self.initial_uav_positions {
            Some(q) => Ok(q.clone()),
            None => init_uav_positions(self, seed),
        }
    }
}

/// Parameters for random scenario generation.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ScenarioConfig {
    pub num_iots: usize,
    pub num_mecs: usize,
    pub num_uavs: usize,
    pub area_side: f64,
    pub lambda_avg: f64,
    /// Relative half-width of the per-IoT rate draw; 0 gives identical rates.
    pub lambda_spread: f64,
    pub num_subbands: Option<usize>,
    pub task_input_size: f64,
    pub iot_tx_power: f64,
    pub uav_tx_power_budget: f64,
    pub uav_altitude: f64,
    pub base_frequency: f64,
    pub subband_bandwidth: f64,
    pub noise_density: f64,
    pub delay_threshold: Option<f64>,
    pub queue: QueueParams,
    pub blockage: BlockageParams,
    /// `None` selects the bundled table (or `THZMEC_ABSORPTION_TABLE`).
    pub absorption: Option<Absorption>,
}

impl Default for ScenarioConfig {
    fn default() -> Self {
        Self::table1()
    }
}

/// -174 dBm/Hz in W/Hz.
pub fn noise_density_table1() -> f64 {
    10f64.powf(-17.4) * 1e-3
}

impl ScenarioConfig {
    pub fn table1() -> Self {
        Self {
            num_iots: 20,
            num_mecs: 4,
            num_uavs: 3,
            area_side: 400.0,
            lambda_avg: 1.2,
            lambda_spread: 0.5,
            num_subbands: None,
            task_input_size: 8e7,
            iot_tx_power: 0.2,
            uav_tx_power_budget: 2.0,
            uav_altitude: 20.0,
            base_frequency: 0.34e12,
            subband_bandwidth: 1e9,
            noise_density: noise_density_table1(),
            delay_threshold: None,
            queue: QueueParams {
                computing_units: 2,
                unit_service_rate: 4.0,
            },
            blockage: BlockageParams::table1(),
            absorption: None,
        }
    }

    /// Draws a scenario; identical `(seed, config)` gives a bit-identical result.
    pub fn generate(&self, seed: u64) -> Result<NetworkScenario> {
        if !(self.area_side > 0.0) {
            return Err(invalid("area_side", "must be > 0"));
        }
        if self.num_iots == 0 || self.num_mecs == 0 {
            return Err(invalid("num_iots", "IoT and MEC counts must be positive"));
        }
        if !(self.lambda_spread >= 0.0 && self.lambda_spread < 1.0) {
            return Err(invalid("lambda_spread", "must lie in [0, 1)"));
        }
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let ground = |rng: &mut ChaCha8Rng| -> Point3 {
            [
                rng.gen::<f64>() * self.area_side,
                rng.gen::<f64>() * self.area_side,
                0.0,
            ]
        };
        let iot_positions: Vec<Point3> = (0..self.num_iots).map(|_| ground(&mut rng)).collect();
        let mec_positions: Vec<Point3> = (0..self.num_mecs).map(|_| ground(&mut rng)).collect();
        let arrival_rates = heterogeneous_rates(&mut rng, self.num_iots, self.lambda_avg, self.lambda_spread);
        let absorption = match &self.absorption {
            Some(a) => a.clone(),
            None => Absorption::default_table()?,
        };
        let scenario = NetworkScenario {
            iot_positions,
            mec_positions,
            num_uavs: self.num_uavs,
            uav_altitude: self.uav_altitude,
            area_side: self.area_side,
            initial_uav_positions: None,
            arrival_rates,
            task_input_size: self.task_input_size,
            iot_tx_power: self.iot_tx_power,
            uav_tx_power_budget: self.uav_tx_power_budget,
            base_frequency: self.base_frequency,
            subband_bandwidth: self.subband_bandwidth,
            num_subbands: self.num_subbands.unwrap_or(self.num_iots),
            noise_density: self.noise_density,
            speed_of_light: SPEED_OF_LIGHT,
            delay_threshold: self.delay_threshold,
            queue: self.queue,
            blockage: self.blockage.clone(),
            absorption,
        };
        scenario.validate()?;
        Ok(scenario)
    }
}

/// Uniform draws in `[(1-spread) avg, (1+spread) avg]`, rescaled to mean `avg`.
fn heterogeneous_rates(rng: &mut ChaCha8Rng, n: usize, avg: f64, spread: f64) -> Vec<f64> {
    let raw: Vec<f64> = (0..n)
        .map(|_| avg * (1.0 - spread + 2.0 * spread * rng.gen::<f64>()))
        .collect();
    let mean = raw.iter().sum::<f64>() / n as f64;
    if mean > 0.0 {
        raw.into_iter().map(|l| l * avg / mean).collect()
    } else {
        raw
    }
}

/// Result of Lloyd's algorithm.
#[derive(Debug, Clone)]
pub struct KMeans {
    pub centroids: Vec<[f64; 2]>,
    pub labels: Vec<usize>,
    /// Within-cluster sum of squares after each Lloyd iteration.
    pub wcss_trace: Vec<f64>,
}

fn sq_dist2(a: &[f64; 2], b: &[f64; 2]) -> f64 {
    (a[0] - b[0]).powi(2) + (a[1] - b[1]).powi(2)
}

fn nearest(p: &[f64; 2], centroids: &[[f64; 2]]) -> usize {
    let mut best = 0;
    let mut best_d = f64::INFINITY;
    for (c, cen) in centroids.iter().enumerate() {
        let d = sq_dist2(p, cen);
        if d < best_d {
            best_d = d;
            best = c;
        }
    }
    best
}

/// k-means++ seeding followed by at most `max_iter` Lloyd iterations.
pub fn kmeans(points: &[[f64; 2]], k: usize, seed: u64, max_iter: usize) -> Result<KMeans> {
    if k == 0 {
        return Ok(KMeans {
            centroids: vec![],
            labels: vec![0; points.len()],
            wcss_trace: vec![],
        });
    }
    if k > points.len() {
        return Err(Error::TooManyUavs {
            uavs: k,
            iots: points.len(),
        });
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut centroids = vec![points[rng.gen_range(0..points.len())]];
    while centroids.len() < k {
        let d2: Vec<f64> = points
            .iter()
            .map(|p| centroids.iter().map(|c| sq_dist2(p, c)).fold(f64::INFINITY, f64::min))
            .collect();
        let total: f64 = d2.iter().sum();
        let next = if total > 0.0 {
            let mut target = rng.gen::<f64>() * total;
            let mut pick = d2.iter().rposition(|&d| d > 0.0).unwrap_or(0);
            for (idx, &d) in d2.iter().enumerate() {
                if d > 0.0 && target < d {
                    pick = idx;
                    break;
                }
                target -= d;
            }
            pick
        } else {
            rng.gen_range(0..points.len())
        };
        centroids.push(points[next]);
    }

    let mut labels: Vec<usize> = points.iter().map(|p| nearest(p, &centroids)).collect();
    let wcss = |labels: &[usize], centroids: &[[f64; 2]]| -> f64 {
        points
            .iter()
            .zip(labels)
            .map(|(p, &l)| sq_dist2(p, &centroids[l]))
            .sum()
    };
    let mut wcss_trace = vec![wcss(&labels, &centroids)];
    for _ in 0..max_iter {
        let mut sums = vec![[0.0f64; 2]; k];
        let mut counts = vec![0usize; k];
        for (p, &l) in points.iter().zip(&labels) {
            sums[l][0] += p[0];
            sums[l][1] += p[1];
            counts[l] += 1;
        }
        for c in 0..k {
            if counts[c] > 0 {
                centroids[c] = [sums[c][0] / counts[c] as f64, sums[c][1] / counts[c] as f64];
            }
        }
        // an empty cluster takes the point worst served by its current centroid
        for c in 0..k {
            if counts[c] == 0 {
                let far = (0..points.len())
                    .filter(|&p| counts[labels[p]] > 1)
                    .max_by(|&a, &b| {
                        sq_dist2(&points[a], &centroids[labels[a]])
                            .total_cmp(&sq_dist2(&points[b], &centroids[labels[b]]))
                            .then(b.cmp(&a))
                    });
                if let Some(p) = far {
                    counts[labels[p]] -= 1;
                    labels[p] = c;
                    counts[c] = 1;
                    centroids[c] = points[p];
                }
            }
        }
        let new_labels: Vec<usize> = points.iter().map(|p| nearest(p, &centroids)).collect();
        let changed = new_labels != labels;
        labels = new_labels;
        wcss_trace.push(wcss(&labels, &centroids));
        if !changed {
            break;
        }
    }
    Ok(KMeans {
        centroids,
        labels,
        wcss_trace,
    })
}

/// k-means (k = M) on the IoT ground positions, lifted to the UAV altitude.
pub fn init_uav_positions(scenario: &NetworkScenario, seed: u64) -> Result<Vec<Point3>> {
    let points: Vec<[f64; 2]> = scenario.iot_positions.iter().map(|p| [p[0], p[1]]).collect();
    let km = kmeans(&points, scenario.num_uavs, seed, 100)?;
    Ok(km
        .centroids
        .iter()
        .map(|c| [c[0], c[1], scenario.uav_altitude])
        .collect())
}

// ---- JSON file schema ----

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct IotsSection {
    pub positions: Vec<Point3>,
    pub arrival_rates: Vec<f64>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MecsSection {
    pub positions: Vec<Point3>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct UavsSection {
    pub count: usize,
    pub altitude_m: f64,
    pub area_side_m: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub initial_positions: Option<Vec<Point3>>,
}

fn default_light() -> f64 {
    SPEED_OF_LIGHT
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PhysicsSection {
    pub task_input_size_bits: f64,
    pub iot_tx_power_w: f64,
    pub uav_tx_power_budget_w: f64,
    pub noise_density_w_per_hz: f64,
    #[serde(default = "default_light")]
    pub speed_of_light_m_per_s: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub delay_threshold_s: Option<f64>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SpectrumSection {
    pub base_frequency_hz: f64,
    pub subband_bandwidth_hz: f64,
    pub num_subbands: usize,
    pub absorption: Absorption,
}

/// On-disk scenario layout. All units SI.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioFile {
    pub iots: IotsSection,
    pub mecs: MecsSection,
    pub uavs: UavsSection,
    pub physics: PhysicsSection,
    pub queue: QueueParams,
    pub blockage: BlockageParams,
    pub spectrum: SpectrumSection,
}

impl TryFrom<ScenarioFile> for NetworkScenario {
    type Error = Error;

    fn try_from(f: ScenarioFile) -> Result<Self> {
        let s = NetworkScenario {
            iot_positions: f.iots.positions,
            mec_positions: f.mecs.positions,
            num_uavs: f.uavs.count,
            uav_altitude: f.uavs.altitude_m,
            area_side: f.uavs.area_side_m,
            initial_uav_positions: f.uavs.initial_positions,
            arrival_rates: f.iots.arrival_rates,
            task_input_size: f.physics.task_input_size_bits,
            iot_tx_power: f.physics.iot_tx_power_w,
            uav_tx_power_budget: f.physics.uav_tx_power_budget_w,
            base_frequency: f.spectrum.base_frequency_hz,
            subband_bandwidth: f.spectrum.subband_bandwidth_hz,
            num_subbands: f.spectrum.num_subbands,
            noise_density: f.physics.noise_density_w_per_hz,
            speed_of_light: f.physics.speed_of_light_m_per_s,
            delay_threshold: f.physics.delay_threshold_s,
            queue: f.queue,
            blockage: f.blockage,
            absorption: f.spectrum.absorption,
        };
        s.validate()?;
        Ok(s)
    }
}

impl From<NetworkScenario> for ScenarioFile {
    fn from(s: NetworkScenario) -> Self {
        ScenarioFile {
            iots: IotsSection {
                positions: s.iot_positions,
                arrival_rates: s.arrival_rates,
            },
            mecs: MecsSection {
                positions: s.mec_positions,
            },
            uavs: UavsSection {
                count: s.num_uavs,
                altitude_m: s.uav_altitude,
                area_side_m: s.area_side,
                initial_positions: s.initial_uav_positions,
            },
            physics: PhysicsSection {
                task_input_size_bits: s.task_input_size,
                iot_tx_power_w: s.iot_tx_power,
                uav_tx_power_budget_w: s.uav_tx_power_budget,
                noise_density_w_per_hz: s.noise_density,
                speed_of_light_m_per_s: s.speed_of_light,
                delay_threshold_s: s.delay_threshold,
            },
            queue: s.queue,
            blockage: s.blockage,
            spectrum: SpectrumSection {
                base_frequency_hz: s.base_frequency,
                subband_bandwidth_hz: s.subband_bandwidth,
                num_subbands: s.num_subbands,
                absorption: s.absorption,
            },
        }
    }
}

pub fn scenario_from_json(text: &str) -> Result<NetworkScenario> {
    let file: ScenarioFile = serde_json::from_str(text)?;
    NetworkScenario::try_from(file)
}

pub fn scenario_to_json(scenario: &NetworkScenario) -> Result<String> {
    Ok(serde_json::to_string_pretty(&ScenarioFile::from(scenario.clone()))?)
}

pub fn load_scenario(path: impl AsRef<Path>) -> Result<NetworkScenario> {
    scenario_from_json(&std::fs::read_to_string(path)?)
}

pub fn save_scenario(scenario: &NetworkScenario, path: impl AsRef<Path>) -> Result<()> {
    std::fs::write(path, scenario_to_json(scenario)?)?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn generate_table1_positions_in_area() {
        let sc = ScenarioConfig::table1().generate(7).unwrap();
        assert_eq!(sc.num_iots(), 20);
        assert_eq!(sc.num_mecs(), 4);
        assert_eq!(sc.num_subbands, 20);
        for p in sc.iot_positions.iter().chain(&sc.mec_positions) {
            assert!(p[0] >= 0.0 && p[0] <= 400.0 && p[1] >= 0.0 && p[1] <= 400.0);
            assert_eq!(p[2], 0.0);
        }
        let mean = sc.total_arrival_rate() / 20.0;
        assert!((mean - 1.2).abs() < 1e-12);
        // 24 < 4 * 2 * 4 = 32
        assert!(sc.total_arrival_rate() < 32.0);
    }

    #[test]
    fn generation_is_deterministic() {
        let cfg = ScenarioConfig::table1();
        assert_eq!(cfg.generate(7).unwrap(), cfg.generate(7).unwrap());
        assert_ne!(cfg.generate(7).unwrap(), cfg.generate(8).unwrap());
    }

    #[test]
    fn stability_infeasible_is_rejected() {
        let cfg = ScenarioConfig {
            lambda_avg: 1.6,
            ..ScenarioConfig::table1()
        };
        assert!(matches!(cfg.generate(1), Err(Error::StabilityInfeasible { .. })));
    }

    #[test]
    fn kmeans_two_points_one_cluster() {
        let km = kmeans(&[[0.0, 0.0], [100.0, 0.0]], 1, 3, 100).unwrap();
        assert_eq!(km.centroids, vec![[50.0, 0.0]]);
    }

    #[test]
    fn kmeans_k_equals_n() {
        let pts = [[0.0, 0.0], [10.0, 5.0], [200.0, 30.0], [40.0, 300.0]];
        let km = kmeans(&pts, 4, 11, 100).unwrap();
        let mut c = km.centroids.clone();
        c.sort_by(|a, b| a[0].total_cmp(&b[0]));
        let mut p = pts.to_vec();
        p.sort_by(|a, b| a[0].total_cmp(&b[0]));
        assert_eq!(c, p);
        assert!(kmeans(&pts, 5, 0, 100).is_err());
    }

    #[test]
    fn kmeans_table1_centroids_inside_cluster_hull() {
        let sc = ScenarioConfig::table1().generate(7).unwrap();
        let pts: Vec<[f64; 2]> = sc.iot_positions.iter().map(|p| [p[0], p[1]]).collect();
        let km = kmeans(&pts, 3, 7, 100).unwrap();
        for w in km.wcss_trace.windows(2) {
            assert!(w[1] <= w[0] + 1e-9);
        }
        for (c, cen) in km.centroids.iter().enumerate() {
            let members: Vec<_> = pts.iter().zip(&km.labels).filter(|(_, &l)| l == c).map(|(p, _)| *p).collect();
            assert!(!members.is_empty());
            // mean of the members, hence inside their hull
            let mx = members.iter().map(|p| p[0]).sum::<f64>() / members.len() as f64;
            let my = members.iter().map(|p| p[1]).sum::<f64>() / members.len() as f64;
            assert!((mx - cen[0]).abs() < 1e-9 && (my - cen[1]).abs() < 1e-9);
        }
        let q = init_uav_positions(&sc, 7).unwrap();
        assert_eq!(q.len(), 3);
        assert!(q.iter().all(|p| p[2] == 20.0));
        assert_eq!(q, init_uav_positions(&sc, 7).unwrap());
    }

    #[test]
    fn json_round_trip_is_exact() {
        let sc = ScenarioConfig::table1().generate(42).unwrap();
        let text = scenario_to_json(&sc).unwrap();
        assert_eq!(scenario_from_json(&text).unwrap(), sc);
    }

    #[test]
    fn missing_field_is_named() {
        let sc = ScenarioConfig::table1().generate(1).unwrap();
        let mut v: serde_json::Value = serde_json::from_str(&scenario_to_json(&sc).unwrap()).unwrap();
        v["iots"].as_object_mut().unwrap().remove("arrival_rates");
        let err = scenario_from_json(&v.to_string()).unwrap_err();
        assert!(err.to_string().contains("arrival_rates"), "{err}");
    }

    #[test]
    fn too_few_subbands_is_an_invariant_error() {
        let sc = ScenarioConfig::table1().generate(1).unwrap();
        let mut v: serde_json::Value = serde_json::from_str(&scenario_to_json(&sc).unwrap()).unwrap();
        v["spectrum"]["num_subbands"] = serde_json::json!(5);
        let err = scenario_from_json(&v.to_string()).unwrap_err();
        assert!(matches!(err, Error::InsufficientSubbands { subbands: 5, iots: 20 }));
    }
}
