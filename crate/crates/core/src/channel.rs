//! THz line-of-sight channel: free-space spreading, molecular absorption,
//! random-blocker non-blockage probability and long-term achievable rates.

use std::f64::consts::PI;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::scenario::{BlockageParams, NetworkScenario};

/// Environment variable that points at an absorption CSV replacing the bundled one.
pub const ABSORPTION_ENV: &str = "THZMEC_ABSORPTION_TABLE";

const BUNDLED_TABLE: &str = include_str!("../data/absorption_default.csv");

/// Piecewise-linear molecular absorption coefficient K(f) in 1/m.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Vec<(f64, f64)>", into = "Vec<(f64, f64)>")]
pub struct AbsorptionTable {
    samples: Vec<(f64, f64)>,
}

impl TryFrom<Vec<(f64, f64)>> for AbsorptionTable {
    type Error = Error;

    fn try_from(samples: Vec<(f64, f64)>) -> Result<Self> {
        AbsorptionTable::new(samples)
    }
}

impl From<AbsorptionTable> for Vec<(f64, f64)> {
    fn from(t: AbsorptionTable) -> Self {
        t.samples
    }
}

impl AbsorptionTable {
    pub fn new(samples: Vec<(f64, f64)>) -> Result<Self> {
        if samples.len() < 2 {
            return Err(Error::Table("need at least two samples".into()));
        }
        for w in samples.windows(2) {
            if !(w[1].0 > w[0].0) {
                return Err(Error::Table(format!(
                    "frequencies must be strictly increasing ({} then {})",
                    w[0].0, w[1].0
                )));
            }
        }
        if let Some(&(f, k)) = samples
            .iter()
            .find(|(f, k)| !f.is_finite() || !k.is_finite() || *k < 0.0)
        {
            return Err(Error::Table(format!("bad sample ({f}, {k})")));
        }
        Ok(Self { samples })
    }

    /// Parses the `frequency_hz,k_per_m` CSV format.
    pub fn from_csv_str(text: &str) -> Result<Self> {
        let mut rdr = csv::ReaderBuilder::new()
            .trim(csv::Trim::All)
            .from_reader(text.as_bytes());
        let headers = rdr.headers()?.clone();
        if headers.len() != 2 || &headers[0] != "frequency_hz" || &headers[1] != "k_per_m" {
            return Err(Error::Table(format!(
                "expected header `frequency_hz,k_per_m`, got `{}`",
                headers.iter().collect::<Vec<_>>().join(",")
            )));
        }
        let mut samples = Vec::new();
        for (line, rec) in rdr.records().enumerate() {
            let rec = rec?;
            let parse = |idx: usize| -> Result<f64> {
                rec[idx].parse::<f64>().map_err(|e| {
                    Error::Table(format!("row {}: `{}`: {e}", line + 2, &rec[idx]))
                })
            };
            samples.push((parse(0)?, parse(1)?));
        }
        Self::new(samples)
    }

    pub fn from_csv_path(path: impl AsRef<Path>) -> Result<Self> {
        Self::from_csv_str(&std::fs::read_to_string(path)?)
    }

    /// The bundled representative window table (0.1–1.1 THz).
    pub fn bundled() -> Self {
        Self::from_csv_str(BUNDLED_TABLE).expect("bundled absorption table is valid")
    }

    pub fn samples(&self) -> &[(f64, f64)] {
        &self.samples
    }

    pub fn range(&self) -> (f64, f64) {
        (self.samples[0].0, self.samples[self.samples.len() - 1].0)
    }

    /// Linear interpolation; querying outside the table is an error.
    pub fn k_at(&self, freq: f64) -> Result<f64> {
        let (lo, hi) = self.range();
        if !(freq >= lo && freq <= hi) {
            return Err(Error::Extrapolation { freq, lo, hi });
        }
        let idx = self.samples.partition_point(|&(f, _)| f <= freq);
        if idx == self.samples.len() {
            return Ok(self.samples[idx - 1].1);
        }
        let (f0, k0) = self.samples[idx - 1];
        let (f1, k1) = self.samples[idx];
        Ok(k0 + (k1 - k0) * (freq - f0) / (f1 - f0))
    }
}

/// Source of K(f) for a scenario.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Absorption {
    Constant { k_per_m: f64 },
    Table { samples: AbsorptionTable },
}

impl Absorption {
    /// Bundled table, or the CSV named by `THZMEC_ABSORPTION_TABLE` when set.
    pub fn default_table() -> Result<Self> {
        let table = match std::env::var_os(ABSORPTION_ENV) {
            Some(path) => AbsorptionTable::from_csv_path(path)?,
            None => AbsorptionTable::bundled(),
        };
        Ok(Absorption::Table { samples: table })
    }

    pub fn k_at(&self, freq: f64) -> Result<f64> {
        match self {
            Absorption::Constant { k_per_m } => Ok(*k_per_m),
            Absorption::Table { samples } => samples.k_at(freq),
        }
    }

    pub(crate) fn validate(&self) -> Result<()> {
        match self {
            Absorption::Constant { k_per_m } if !(*k_per_m >= 0.0 && k_per_m.is_finite()) => Err(
                Error::Table(format!("constant K must be finite and >= 0, got {k_per_m}")),
            ),
            _ => Ok(()),
        }
    }
}

/// The three directional link types of the network.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum LinkKind {
    /// Ground-to-ground, subject to blockage.
    IotToMec,
    IotToUav,
    UavToMec,
}

impl LinkKind {
    pub fn is_blockage_prone(self) -> bool {
        matches!(self, LinkKind::IotToMec)
    }
}

/// Center frequency of sub-band `u` (1-based): `f_o + (u - 1/2) B`.
pub fn subband_center_frequency(u: usize, base_frequency: f64, bandwidth: f64) -> Result<f64> {
    if u == 0 {
        return Err(Error::IndexOutOfRange {
            index: u,
            max: usize::MAX,
        });
    }
    Ok(base_frequency + (u as f64 - 0.5) * bandwidth)
}

/// Free-space spreading factor `(c / (4 pi f))^2`, i.e. the gain at 1 m with no absorption.
pub fn spreading_constant(freq: f64, speed_of_light: f64) -> f64 {
    let a = speed_of_light / (4.0 * PI * freq);
    a * a
}

/// Power gain `(c / (4 pi f d))^2 exp(-K d)` using the standard speed of light.
pub fn channel_gain(distance: f64, freq: f64, k_per_m: f64) -> Result<f64> {
    channel_gain_with(distance, freq, k_per_m, crate::scenario::SPEED_OF_LIGHT)
}

pub fn channel_gain_with(distance: f64, freq: f64, k_per_m: f64, speed_of_light: f64) -> Result<f64> {
    if !(distance > 0.0) {
        return Err(Error::Domain(format!("distance must be > 0, got {distance}")));
    }
    if !(freq > 0.0) {
        return Err(Error::Domain(format!("frequency must be > 0, got {freq}")));
    }
    Ok(spreading_constant(freq, speed_of_light) / (distance * distance) * (-k_per_m * distance).exp())
}

/// `zeta * exp(-delta_b * d)` for a ground-to-ground link.
pub fn non_blockage_probability(distance: f64, blockage: &BlockageParams) -> Result<f64> {
    if !(distance >= 0.0) {
        return Err(Error::Domain(format!("distance must be >= 0, got {distance}")));
    }
    let delta = blockage.delta()?;
    Ok(blockage.zeta() * (-delta * distance).exp())
}

/// `g = 1 + P |h|^2 / (B N0)`.
pub fn snr_plus_one(power: f64, gain: f64, bandwidth: f64, noise_density: f64) -> f64 {
    1.0 + power * gain / (bandwidth * noise_density)
}

/// Long-term throughput of a link on sub-band `u` (1-based) at transmit power `power`.
pub fn long_term_rate(
    kind: LinkKind,
    distance: f64,
    power: f64,
    u: usize,
    scenario: &NetworkScenario,
) -> Result<f64> {
    if !(power >= 0.0) {
        return Err(Error::Domain(format!("power must be >= 0, got {power}")));
    }
    let freq = scenario.subband_frequency(u)?;
    let k = scenario.absorption.k_at(freq)?;
    let gain = channel_gain_with(distance, freq, k, scenario.speed_of_light)?;
    let b = scenario.subband_bandwidth;
    let rate = b * snr_plus_one(power, gain, b, scenario.noise_density).log2();
    if kind.is_blockage_prone() {
        Ok(rate * non_blockage_probability(distance, &scenario.blockage)?)
    } else {
        Ok(rate)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::scenario::{ScenarioConfig, SPEED_OF_LIGHT};

    fn table1_blockage() -> BlockageParams {
        BlockageParams::table1()
    }

    #[test]
    fn subband_frequencies() {
        let f = |u| subband_center_frequency(u, 0.34e12, 1e9).unwrap();
        assert!((f(1) - 0.3405e12).abs() < 1e-3);
        assert!((f(2) - 0.3415e12).abs() < 1e-3);
        assert!((f(40) - 0.3795e12).abs() < 1e-3);
        assert!(subband_center_frequency(0, 0.34e12, 1e9).is_err());
    }

    #[test]
    fn free_space_gain_matches_direct_evaluation() {
        let f = 0.34e12;
        let g = channel_gain(1.0, f, 0.0).unwrap();
        let expected = (SPEED_OF_LIGHT / (4.0 * PI * f)).powi(2);
        assert!((g - expected).abs() / expected < 1e-15);
        // about 4.92e-9 at 1 m, 0.34 THz
        assert!((g - 4.9234e-9).abs() < 1e-12, "{g}");
        let g2 = channel_gain(2.0, f, 0.0).unwrap();
        assert!((g / g2 - 4.0).abs() < 1e-12);
        let gk = channel_gain(100.0, f, 0.01).unwrap();
        let g0 = channel_gain(100.0, f, 0.0).unwrap();
        assert!((gk / g0 - (-1.0f64).exp()).abs() < 1e-14);
        assert!(channel_gain(0.0, f, 0.0).is_err());
    }

    #[test]
    fn blockage_probability_values() {
        let b = table1_blockage();
        let p0 = non_blockage_probability(0.0, &b).unwrap();
        assert!((p0 - (-0.036f64).exp()).abs() < 1e-15);
        assert!((p0 - 0.96464).abs() < 1e-5);
        let delta: f64 = 2.0 * 0.2 * 0.3 * (1.7 - 0.3) / (3.0 - 0.3);
        let p50 = non_blockage_probability(50.0, &b).unwrap();
        assert!((p50 - p0 * (-delta * 50.0).exp()).abs() < 1e-15);
        let free = BlockageParams { density: 0.0, ..b.clone() };
        assert_eq!(non_blockage_probability(123.0, &free).unwrap(), 1.0);
        let flat = BlockageParams { mec_height: 0.3, iot_height: 0.3, ..b };
        assert!(matches!(non_blockage_probability(1.0, &flat), Err(Error::Degenerate(_))));
    }

    #[test]
    fn rate_properties() {
        let sc = ScenarioConfig::table1().generate(7).unwrap();
        assert_eq!(long_term_rate(LinkKind::IotToUav, 80.0, 0.0, 1, &sc).unwrap(), 0.0);
        let aerial = long_term_rate(LinkKind::IotToUav, 30.0, 0.2, 1, &sc).unwrap();
        let ground = long_term_rate(LinkKind::IotToMec, 30.0, 0.2, 1, &sc).unwrap();
        assert!(aerial > ground);

        // independent evaluation of the 100 m, 2 W link
        let f = 0.34e12 + 0.5e9;
        let k = sc.absorption.k_at(f).unwrap();
        let h2 = (299_792_458.0 / (4.0 * PI * f * 100.0)).powi(2) * (-k * 100.0).exp();
        let n0 = 10f64.powf(-17.4) * 1e-3;
        let expected = 1e9 * (1.0 + 2.0 * h2 / (1e9 * n0)).log2();
        let got = long_term_rate(LinkKind::UavToMec, 100.0, 2.0, 1, &sc).unwrap();
        assert!(got.is_finite() && got > 0.0);
        assert!((got - expected).abs() / expected < 1e-12);
    }

    #[test]
    fn table_interpolation_and_extrapolation() {
        let t = AbsorptionTable::new(vec![(1.0, 0.0), (3.0, 2.0)]).unwrap();
        assert_eq!(t.k_at(2.0).unwrap(), 1.0);
        assert_eq!(t.k_at(3.0).unwrap(), 2.0);
        assert!(matches!(t.k_at(3.5), Err(Error::Extrapolation { .. })));
        assert!(AbsorptionTable::new(vec![(1.0, 0.0), (1.0, 2.0)]).is_err());
        assert!(AbsorptionTable::new(vec![(1.0, 0.0), (2.0, -1.0)]).is_err());
    }

    #[test]
    fn csv_parsing() {
        let t = AbsorptionTable::from_csv_str("frequency_hz,k_per_m\n1e11,0.001\n2e11,0.002\n").unwrap();
        assert_eq!(t.samples().len(), 2);
        assert!(AbsorptionTable::from_csv_str("f,k\n1,2\n2,3\n").is_err());
        assert!(AbsorptionTable::from_csv_str("frequency_hz,k_per_m\n2,1\n1,1\n").is_err());
        let bundled = AbsorptionTable::bundled();
        let (lo, hi) = bundled.range();
        assert!(lo <= 0.1e12 && hi >= 1.0e12);
    }
}
