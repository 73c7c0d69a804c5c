//! Experiment driver: single runs, parameter sweeps, paired comparisons and the queueing
//! bound grid. Everything here is deterministic given the spec and seeds.

use std::collections::BTreeMap;
use std::fmt;
use std::path::Path;
use std::str::FromStr;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::baselines::{
    enumeration_count, run_bcd_sca, run_exhaustive, run_nr_sca, run_uao, run_uo, run_uo_guao, BaselineConfig,
    QuantizationGrid, DEFAULT_ENUMERATION_CAP,
};
use crate::error::{invalid, Result};
use crate::pdd::{run_pdd, PddConfig};
use crate::queueing::{operation_delay, operation_delay_upper};
use crate::report::RunReport;
use crate::scenario::{scenario_from_json, NetworkScenario, ScenarioConfig, ScenarioFile};

/// Bundled Table I generator config.
pub const TABLE1_JSON: &str = include_str!("../data/table1.json");

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Algorithm {
    Pdd,
    Uo,
    Uao,
    NrSca,
    UoGuao,
    BcdSca,
    Exhaustive,
}

impl Algorithm {
    pub const ALL: [Algorithm; 7] = [
        Algorithm::Pdd,
        Algorithm::Uo,
        Algorithm::Uao,
        Algorithm::NrSca,
        Algorithm::UoGuao,
        Algorithm::BcdSca,
        Algorithm::Exhaustive,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Algorithm::Pdd => "pdd",
            Algorithm::Uo => "uo",
            Algorithm::Uao => "uao",
            Algorithm::NrSca => "nr-sca",
            Algorithm::UoGuao => "uo-guao",
            Algorithm::BcdSca => "bcd-sca",
            Algorithm::Exhaustive => "exhaustive",
        }
    }
}

impl fmt::Display for Algorithm {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Algorithm {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, String> {
        Algorithm::ALL
            .into_iter()
            .find(|a| a.name() == s)
            .ok_or_else(|| {
                let names: Vec<_> = Algorithm::ALL.iter().map(|a| a.name()).collect();
                format!("unknown algorithm `{s}` (expected one of {})", names.join(", "))
            })
    }
}

/// Solver settings shared by every algorithm in a run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SolverSettings {
    pub pdd: PddConfig,
    pub baselines: BaselineConfig,
    pub grid: QuantizationGrid,
    pub enumeration_cap: f64,
}

impl Default for SolverSettings {
    fn default() -> Self {
        Self {
            pdd: PddConfig::default(),
            baselines: BaselineConfig::default(),
            grid: QuantizationGrid { n_q1: 5, n_q2: 9 },
            enumeration_cap: DEFAULT_ENUMERATION_CAP,
        }
    }
}

pub fn run_algorithm(algo: Algorithm, scenario: &NetworkScenario, settings: &SolverSettings, seed: u64) -> Result<RunReport> {
    match algo {
        Algorithm::Pdd => run_pdd(scenario, &settings.pdd, seed),
        Algorithm::Uo => run_uo(scenario, &settings.baselines, seed),
        Algorithm::Uao => run_uao(scenario, &settings.baselines, seed),
        Algorithm::NrSca => run_nr_sca(scenario, &settings.baselines, seed),
        Algorithm::UoGuao => run_uo_guao(scenario, &settings.baselines, seed),
        Algorithm::BcdSca => run_bcd_sca(scenario, &settings.baselines, seed),
        Algorithm::Exhaustive => run_exhaustive(scenario, &settings.grid, settings.enumeration_cap, seed),
    }
}

pub fn table1_config() -> ScenarioConfig {
    serde_json::from_str(TABLE1_JSON).expect("bundled table1.json is valid")
}

/// A scenario input: either a concrete network or a generator config drawn per seed.
#[derive(Debug, Clone)]
pub enum ScenarioSource {
    Fixed(Box<NetworkScenario>),
    Generated(ScenarioConfig),
}

impl ScenarioSource {
    /// A file holding a concrete scenario or a generator config. `None` gives Table I.
    pub fn load(path: Option<&Path>) -> Result<Self> {
        let Some(path) = path else {
            return Ok(ScenarioSource::Generated(table1_config()));
        };
        let text = std::fs::read_to_string(path)?;
        Self::parse(&text)
    }

    pub fn parse(text: &str) -> Result<Self> {
        if serde_json::from_str::<ScenarioFile>(text).is_ok() {
            return Ok(ScenarioSource::Fixed(Box::new(scenario_from_json(text)?)));
        }
        Ok(ScenarioSource::Generated(serde_json::from_str(text)?))
    }

    pub fn instantiate(&self, seed: u64) -> Result<NetworkScenario> {
        match self {
            ScenarioSource::Fixed(s) => {
                s.validate()?;
                Ok((**s).clone())
            }
            ScenarioSource::Generated(c) => c.generate(seed),
        }
    }
}

// ---- sweeps ----

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SweepParam {
    /// Mean per-IoT arrival rate in tasks/s.
    TrafficIntensity,
    /// Lower edge of the first sub-band, Hz.
    CarrierFrequency,
    /// IoT transmit power, W.
    IotPower,
}

impl SweepParam {
    pub fn name(self) -> &'static str {
        match self {
            SweepParam::TrafficIntensity => "traffic_intensity",
            SweepParam::CarrierFrequency => "carrier_frequency",
            SweepParam::IotPower => "iot_power",
        }
    }

    pub fn apply(self, base: &ScenarioConfig, value: f64) -> Result<ScenarioConfig> {
        if !(value.is_finite() && value > 0.0) {
            return Err(invalid("values", format!("{} must be finite and > 0, got {value}", self.name())));
        }
        let mut c = base.clone();
        match self {
            SweepParam::TrafficIntensity => c.lambda_avg = value,
            SweepParam::CarrierFrequency => c.base_frequency = value,
            SweepParam::IotPower => c.iot_tx_power = value,
        }
        Ok(c)
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepSpec {
    pub param: SweepParam,
    pub values: Vec<f64>,
    pub seeds: Vec<u64>,
    pub algorithms: Vec<Algorithm>,
    #[serde(default = "table1_config")]
    pub base: ScenarioConfig,
    #[serde(default)]
    pub settings: SolverSettings,
}

impl SweepSpec {
    pub fn validate(&self) -> Result<()> {
        if self.values.is_empty() {
            return Err(invalid("values", "sweep needs at least one value"));
        }
        if self.seeds.is_empty() {
            return Err(invalid("seeds", "sweep needs at least one seed"));
        }
        if self.algorithms.is_empty() {
            return Err(invalid("algorithms", "sweep needs at least one algorithm"));
        }
        for &v in &self.values {
            self.param.apply(&self.base, v)?;
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepRow {
    pub param: String,
    pub value: f64,
    pub seed: u64,
    pub algo: String,
    pub mean_delay_s: f64,
    pub comm_s: f64,
    pub comp_s: f64,
    pub converged: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepFailure {
    pub param: String,
    pub value: f64,
    pub seed: u64,
    pub algo: String,
    pub error: String,
}

#[derive(Debug, Clone, Default)]
pub struct SweepOutcome {
    pub rows: Vec<SweepRow>,
    pub failures: Vec<SweepFailure>,
}

/// Runs every `(value, seed, algorithm)` cell. Failed cells are collected, never fatal.
/// Output order is value, seed, then algorithm as listed, regardless of scheduling.
pub fn run_sweep(spec: &SweepSpec) -> Result<SweepOutcome> {
    spec.validate()?;
    let mut cells = Vec::new();
    for (vi, &value) in spec.values.iter().enumerate() {
        for (si, &seed) in spec.seeds.iter().enumerate() {
            for (ai, &algo) in spec.algorithms.iter().enumerate() {
                cells.push(((vi, si, ai), value, seed, algo));
            }
        }
    }
    let param = spec.param.name().to_string();
    let mut results: Vec<_> = cells
        .into_par_iter()
        .map(|(key, value, seed, algo)| {
            let res = spec
                .param
                .apply(&spec.base, value)
                .and_then(|c| c.generate(seed))
                .and_then(|sc| run_algorithm(algo, &sc, &spec.settings, seed));
            log::info!("{param}={value} seed={seed} {algo}: {}", if res.is_ok() { "ok" } else { "failed" });
            (key, value, seed, algo, res)
        })
        .collect();
    results.sort_by_key(|r| r.0);
    let mut out = SweepOutcome::default();
    for (_, value, seed, algo, res) in results {
        match res {
            Ok(r) => out.rows.push(SweepRow {
                param: param.clone(),
                value,
                seed,
                algo: algo.name().to_string(),
                mean_delay_s: r.mean_delay_s,
                comm_s: r.mean_comm_s,
                comp_s: r.mean_comp_s,
                converged: r.converged,
            }),
            Err(e) => out.failures.push(SweepFailure {
                param: param.clone(),
                value,
                seed,
                algo: algo.name().to_string(),
                error: e.to_string(),
            }),
        }
    }
    Ok(out)
}

pub fn write_csv<T: Serialize>(rows: &[T], path: &Path, header: &[&str]) -> Result<()> {
    let mut w = csv::WriterBuilder::new().has_headers(false).from_path(path)?;
    w.write_record(header)?;
    for r in rows {
        w.serialize(r)?;
    }
    w.flush()?;
    Ok(())
}

pub const SWEEP_HEADER: [&str; 8] = ["param", "value", "seed", "algo", "mean_delay_s", "comm_s", "comp_s", "converged"];
pub const FAILURE_HEADER: [&str; 5] = ["param", "value", "seed", "algo", "error"];

/// Writes `sweep.csv` and, when any cell failed, `failures.csv` into `dir`.
pub fn write_sweep(outcome: &SweepOutcome, dir: &Path) -> Result<()> {
    std::fs::create_dir_all(dir)?;
    write_csv(&outcome.rows, &dir.join("sweep.csv"), &SWEEP_HEADER)?;
    let failures = dir.join("failures.csv");
    if outcome.failures.is_empty() {
        if failures.exists() {
            std::fs::remove_file(failures)?;
        }
    } else {
        write_csv(&outcome.failures, &failures, &FAILURE_HEADER)?;
    }
    Ok(())
}

/// Seed-averaged delay per `(algo, value)`, values ascending.
pub fn sweep_means(rows: &[SweepRow]) -> BTreeMap<String, Vec<(f64, f64)>> {
    let mut acc: BTreeMap<(String, u64), (f64, f64, usize)> = BTreeMap::new();
    for r in rows {
        let e = acc.entry((r.algo.clone(), r.value.to_bits())).or_insert((r.value, 0.0, 0));
        e.1 += r.mean_delay_s;
        e.2 += 1;
    }
    let mut out: BTreeMap<String, Vec<(f64, f64)>> = BTreeMap::new();
    for ((algo, _), (v, s, n)) in acc {
        out.entry(algo).or_default().push((v, s / n as f64));
    }
    for v in out.values_mut() {
        v.sort_by(|a, b| a.0.total_cmp(&b.0));
    }
    out
}

// ---- paired comparison ----

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CompareRow {
    pub algo: String,
    pub runs: usize,
    pub mean_delay_s: f64,
    pub std_err_s: f64,
    pub converged: usize,
    /// Mean relative gap to the exhaustive optimum over seeds where it was computed.
    pub gap_vs_exhaustive: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PairRow {
    pub algo: String,
    pub versus: String,
    /// Fraction of shared seeds where `algo` is strictly better.
    pub win_rate: f64,
    pub ties: usize,
    pub seeds: usize,
}

#[derive(Debug, Clone, Default, Serialize, Deserialize)]
pub struct CompareSummary {
    pub rows: Vec<CompareRow>,
    pub pairs: Vec<PairRow>,
    pub failures: Vec<SweepFailure>,
    pub exhaustive_included: bool,
}

fn mean_and_stderr(xs: &[f64]) -> (f64, f64) {
    let n = xs.len() as f64;
    let mean = xs.iter().sum::<f64>() / n;
    if xs.len() < 2 {
        return (mean, 0.0);
    }
    let var = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0);
    (mean, (var / n).sqrt())
}

/// Runs every algorithm on the same seeds. The exhaustive optimum is added automatically when
/// every instance is within the enumeration cap.
pub fn run_compare(source: &ScenarioSource, seeds: &[u64], algos: &[Algorithm], settings: &SolverSettings) -> Result<CompareSummary> {
    if seeds.is_empty() || algos.is_empty() {
        return Err(invalid("seeds", "need at least one seed and one algorithm"));
    }
    let scenarios: Vec<NetworkScenario> = seeds.iter().map(|&s| source.instantiate(s)).collect::<Result<_>>()?;
    let mut algos: Vec<Algorithm> = algos.to_vec();
    let small = scenarios
        .iter()
        .all(|s| enumeration_count(s, &settings.grid) <= settings.enumeration_cap);
    if small && !algos.contains(&Algorithm::Exhaustive) {
        algos.push(Algorithm::Exhaustive);
    }
    let cells: Vec<(usize, usize)> = (0..algos.len()).flat_map(|a| (0..seeds.len()).map(move |s| (a, s))).collect();
    let results: Vec<((usize, usize), Result<RunReport>)> = cells
        .into_par_iter()
        .map(|(a, s)| ((a, s), run_algorithm(algos[a], &scenarios[s], settings, seeds[s])))
        .collect();
    let mut table: BTreeMap<(usize, usize), RunReport> = BTreeMap::new();
    let mut summary = CompareSummary {
        exhaustive_included: algos.contains(&Algorithm::Exhaustive),
        ..CompareSummary::default()
    };
    for ((a, s), r) in results {
        match r {
            Ok(r) => {
                table.insert((a, s), r);
            }
            Err(e) => summary.failures.push(SweepFailure {
                param: "seed".into(),
                value: seeds[s] as f64,
                seed: seeds[s],
                algo: algos[a].name().into(),
                error: e.to_string(),
            }),
        }
    }
    let ex = algos.iter().position(|&a| a == Algorithm::Exhaustive);
    for (a, algo) in algos.iter().enumerate() {
        let delays: Vec<f64> = (0..seeds.len()).filter_map(|s| table.get(&(a, s)).map(|r| r.mean_delay_s)).collect();
        if delays.is_empty() {
            continue;
        }
        let (mean, se) = mean_and_stderr(&delays);
        let gap = ex.and_then(|e| {
            let gaps: Vec<f64> = (0..seeds.len())
                .filter_map(|s| Some((table.get(&(a, s))?.mean_delay_s, table.get(&(e, s))?.mean_delay_s)))
                .map(|(x, opt)| (x - opt) / opt)
                .collect();
            (!gaps.is_empty()).then(|| gaps.iter().sum::<f64>() / gaps.len() as f64)
        });
        summary.rows.push(CompareRow {
            algo: algo.name().into(),
            runs: delays.len(),
            mean_delay_s: mean,
            std_err_s: se,
            converged: (0..seeds.len()).filter(|&s| table.get(&(a, s)).is_some_and(|r| r.converged)).count(),
            gap_vs_exhaustive: gap,
        });
    }
    for a in 0..algos.len() {
        for b in 0..algos.len() {
            if a == b {
                continue;
            }
            let shared: Vec<(f64, f64)> = (0..seeds.len())
                .filter_map(|s| Some((table.get(&(a, s))?.mean_delay_s, table.get(&(b, s))?.mean_delay_s)))
                .collect();
            if shared.is_empty() {
                continue;
            }
            let wins = shared.iter().filter(|(x, y)| x < y).count();
            let ties = shared.iter().filter(|(x, y)| x == y).count();
            summary.pairs.push(PairRow {
                algo: algos[a].name().into(),
                versus: algos[b].name().into(),
                win_rate: wins as f64 / shared.len() as f64,
                ties,
                seeds: shared.len(),
            });
        }
    }
    Ok(summary)
}

// ---- queueing bound grid ----

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BoundRatioSpec {
    /// Aggregate service rate `s * mu`, held fixed.
    #[serde(default = "default_capacity")]
    pub total_service_rate: f64,
    #[serde(default = "default_units")]
    pub computing_units: Vec<usize>,
    #[serde(default = "default_intensities")]
    pub intensities: Vec<f64>,
    /// Seeds of reference Table I runs whose full service-delay ratio is reported.
    #[serde(default = "default_reference_seeds")]
    pub reference_seeds: Vec<u64>,
    #[serde(default = "table1_config")]
    pub base: ScenarioConfig,
    #[serde(default)]
    pub settings: SolverSettings,
}

fn default_capacity() -> f64 {
    100.0
}

fn default_units() -> Vec<usize> {
    vec![2, 4, 5, 10, 20, 25, 50]
}

fn default_intensities() -> Vec<f64> {
    (1..=19).map(|k| k as f64 * 0.05).collect()
}

fn default_reference_seeds() -> Vec<u64> {
    vec![1]
}

impl Default for BoundRatioSpec {
    fn default() -> Self {
        Self {
            total_service_rate: default_capacity(),
            computing_units: default_units(),
            intensities: default_intensities(),
            reference_seeds: default_reference_seeds(),
            base: table1_config(),
            settings: SolverSettings::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BoundCell {
    pub computing_units: usize,
    pub unit_service_rate: f64,
    pub intensity: f64,
    pub arrival_rate: f64,
    pub exact_s: f64,
    pub upper_s: f64,
    pub ratio: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReferenceRatio {
    pub seed: u64,
    pub mean_delay_s: f64,
    pub mean_delay_upper_s: f64,
    pub ratio: f64,
    pub converged: bool,
}

pub const BOUND_HEADER: [&str; 7] = ["computing_units", "unit_service_rate", "intensity", "arrival_rate", "exact_s", "upper_s", "ratio"];
pub const REFERENCE_HEADER: [&str; 5] = ["seed", "mean_delay_s", "mean_delay_upper_s", "ratio", "converged"];

/// Exact against upper-bound operation delay on an `(s, intensity)` grid with `s * mu` fixed.
pub fn bound_grid(spec: &BoundRatioSpec) -> Result<Vec<BoundCell>> {
    if spec.computing_units.is_empty() || spec.intensities.is_empty() {
        return Err(invalid("computing_units", "grid needs at least one unit count and intensity"));
    }
    if !(spec.total_service_rate > 0.0) {
        return Err(invalid("total_service_rate", "must be > 0"));
    }
    let mut out = Vec::new();
    for &s in &spec.computing_units {
        let mu = spec.total_service_rate / s as f64;
        for &rho in &spec.intensities {
            if !(rho > 0.0 && rho < 1.0) {
                return Err(invalid("intensities", format!("need 0 < intensity < 1, got {rho}")));
            }
            let lambda = rho * spec.total_service_rate;
            let exact = operation_delay(s, mu, lambda)?;
            let upper = operation_delay_upper(s, mu, lambda)?;
            out.push(BoundCell {
                computing_units: s,
                unit_service_rate: mu,
                intensity: rho,
                arrival_rate: lambda,
                exact_s: exact,
                upper_s: upper,
                ratio: exact / upper,
            });
        }
    }
    Ok(out)
}

pub fn reference_ratios(spec: &BoundRatioSpec) -> Result<Vec<ReferenceRatio>> {
    spec.reference_seeds
        .par_iter()
        .map(|&seed| {
            let sc = spec.base.generate(seed)?;
            let r = run_pdd(&sc, &spec.settings.pdd, seed)?;
            Ok(ReferenceRatio {
                seed,
                mean_delay_s: r.mean_delay_s,
                mean_delay_upper_s: r.mean_delay_upper_s,
                ratio: r.mean_delay_s / r.mean_delay_upper_s,
                converged: r.converged,
            })
        })
        .collect()
}
