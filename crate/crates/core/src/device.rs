//! Client hardware profiles, fleet normalization, hardware scores, and the
//! CPU × time energy proxy.

use std::collections::HashSet;
use std::io::{Read, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// One client's hardware tuple: CPU cores, RAM, seconds per local epoch and
/// round-trip latency.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DeviceProfile {
    pub client_id: usize,
    pub cpu_cores: u32,
    pub ram_gb: f64,
    pub epoch_time_s: f64,
    pub latency_ms: f64,
}

impl DeviceProfile {
    pub fn validate(&self) -> Result<()> {
        let fields = [
            ("cpu_cores", self.cpu_cores as f64),
            ("ram_gb", self.ram_gb),
            ("epoch_time_s", self.epoch_time_s),
            ("latency_ms", self.latency_ms),
        ];
        for (field, value) in fields {
            if !(value.is_finite() && value > 0.0) {
                return Err(Error::InvalidProfile {
                    client_id: self.client_id,
                    field,
                    value,
                });
            }
        }
        Ok(())
    }
}

/// Checks a fleet is non-empty, every profile is valid and ids are unique.
pub fn validate_fleet(profiles: &[DeviceProfile]) -> Result<()> {
    if profiles.is_empty() {
        return Err(Error::EmptyFleet);
    }
    let mut seen = HashSet::with_capacity(profiles.len());
    for p in profiles {
        p.validate()?;
        if !seen.insert(p.client_id) {
            return Err(Error::DuplicateClient(p.client_id));
        }
    }
    Ok(())
}

/// Scale-free view of a profile. Every field lies in (0, 1] under the default
/// [`EfficiencyTerm::Normalized`] mode.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NormalizedProfile {
    pub client_id: usize,
    pub cpu_hat: f64,
    pub ram_hat: f64,
    /// Training-efficiency term. `min_j T_j / T_i` when normalized, `1 / T_i`
    /// (raw seconds) otherwise.
    pub eff_hat: f64,
    pub lat_hat: f64,
}

/// How the training-time column enters the score.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EfficiencyTerm {
    /// `min_j T_j / T_i`, on the same (0, 1] scale as the other terms.
    #[default]
    Normalized,
    /// `1 / T_i` on raw seconds. Unit-dependent and unbounded as `T -> 0`.
    RawInverse,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ScoreWeights {
    pub alpha: f64,
    pub beta: f64,
    pub gamma: f64,
    pub delta: f64,
}

impl Default for ScoreWeights {
    fn default() -> Self {
        Self {
            alpha: 0.4,
            beta: 0.2,
            gamma: 0.3,
            delta: 0.1,
        }
    }
}

impl ScoreWeights {
    pub fn validate(&self) -> Result<()> {
        let named = [
            ("weights.alpha", self.alpha),
            ("weights.beta", self.beta),
            ("weights.gamma", self.gamma),
            ("weights.delta", self.delta),
        ];
        for (field, w) in named {
            if !(w.is_finite() && w >= 0.0) {
                return Err(Error::config(field, format!("must be a finite value >= 0, got {w}")));
            }
        }
        if self.alpha + self.beta + self.gamma + self.delta <= 0.0 {
            return Err(Error::config("weights", "weights must not all be zero"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct HardwareScore {
    pub client_id: usize,
    pub score: f64,
}

/// Column-wise max normalization (`x / max x`); the efficiency column is
/// normalized as `min t / t`.
fn normalize_columns(cpu: &[f64], ram: &[f64], time: &[f64], lat: &[f64]) -> Vec<[f64; 4]> {
    let max = |xs: &[f64]| xs.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let (cpu_max, ram_max, lat_max) = (max(cpu), max(ram), max(lat));
    let time_min = time.iter().copied().fold(f64::INFINITY, f64::min);
    (0..cpu.len())
        .map(|i| {
            [
                cpu[i] / cpu_max,
                ram[i] / ram_max,
                time_min / time[i],
                lat[i] / lat_max,
            ]
        })
        .collect()
}

/// Normalizes a fleet with the default efficiency term. Output order matches
/// input order.
pub fn normalize_fleet(profiles: &[DeviceProfile]) -> Result<Vec<NormalizedProfile>> {
    normalize_fleet_with(profiles, EfficiencyTerm::Normalized)
}

pub fn normalize_fleet_with(
    profiles: &[DeviceProfile],
    term: EfficiencyTerm,
) -> Result<Vec<NormalizedProfile>> {
    validate_fleet(profiles)?;
    let cpu: Vec<f64> = profiles.iter().map(|p| p.cpu_cores as f64).collect();
    let ram: Vec<f64> = profiles.iter().map(|p| p.ram_gb).collect();
    let time: Vec<f64> = profiles.iter().map(|p| p.epoch_time_s).collect();
    let lat: Vec<f64> = profiles.iter().map(|p| p.latency_ms).collect();
    let hats = normalize_columns(&cpu, &ram, &time, &lat);
    Ok(profiles
        .iter()
        .zip(hats)
        .map(|(p, [cpu_hat, ram_hat, eff, lat_hat])| NormalizedProfile {
            client_id: p.client_id,
            cpu_hat,
            ram_hat,
            eff_hat: match term {
                EfficiencyTerm::Normalized => eff,
                EfficiencyTerm::RawInverse => 1.0 / p.epoch_time_s,
            },
            lat_hat,
        })
        .collect())
}

/// `alpha·cpu + beta·ram + gamma·eff − delta·lat` over normalized terms.
pub fn hardware_score(norm: &NormalizedProfile, weights: &ScoreWeights) -> HardwareScore {
    HardwareScore {
        client_id: norm.client_id,
        score: weights.alpha * norm.cpu_hat + weights.beta * norm.ram_hat + weights.gamma * norm.eff_hat
            - weights.delta * norm.lat_hat,
    }
}

/// Normalizes and scores a whole fleet in input order.
pub fn score_fleet(
    profiles: &[DeviceProfile],
    weights: &ScoreWeights,
    term: EfficiencyTerm,
) -> Result<Vec<HardwareScore>> {
    Ok(normalize_fleet_with(profiles, term)?
        .iter()
        .map(|n| hardware_score(n, weights))
        .collect())
}

/// Relative energy proxy `cpu_cores × epoch_time_s × epochs` (constant 1).
/// This is a reporting quantity, not joules.
pub fn energy_proxy(profile: &DeviceProfile, epochs: u32) -> f64 {
    debug_assert!(epochs >= 1);
    profile.cpu_cores as f64 * profile.epoch_time_s * epochs as f64
}

/// Default reference: seconds per epoch of a single core. The bundled fleet's
/// epoch times are `core_seconds / cpu_cores`.
pub const DEFAULT_CORE_SECONDS: f64 = 16.0;

/// The five representative edge devices (laptop, tablet, two phones and a
/// legacy phone). CPU, RAM and latency are the published values; epoch times
/// are not published and are set inversely proportional to the core count.
pub fn table1_fleet(core_seconds: f64) -> Vec<DeviceProfile> {
    const ROWS: [(u32, f64, f64); 5] = [
        (16, 32.0, 170.0), // laptop (high-end)
        (4, 32.0, 183.0),  // tablet
        (4, 16.0, 200.0),  // phone (low RAM)
        (2, 32.0, 261.0),  // legacy phone
        (4, 32.0, 132.0),  // phone (low latency)
    ];
    ROWS.iter()
        .enumerate()
        .map(|(client_id, &(cpu_cores, ram_gb, latency_ms))| DeviceProfile {
            client_id,
            cpu_cores,
            ram_gb,
            epoch_time_s: core_seconds / cpu_cores as f64,
            latency_ms,
        })
        .collect()
}

/// Human-readable names for [`table1_fleet`] rows.
pub const TABLE1_NAMES: [&str; 5] = [
    "Laptop (high-end)",
    "Tablet",
    "Phone (low RAM)",
    "Legacy phone",
    "Phone (low latency)",
];

/// Reads a fleet table with header `client_id,cpu_cores,ram_gb,epoch_time_s,latency_ms`.
pub fn read_fleet_csv(path: &Path) -> Result<Vec<DeviceProfile>> {
    let file = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
    let fleet = parse_fleet_csv(file, path)?;
    validate_fleet(&fleet)?;
    Ok(fleet)
}

pub(crate) fn parse_fleet_csv<R: Read>(reader: R, path: &Path) -> Result<Vec<DeviceProfile>> {
    let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(reader);
    let mut fleet = Vec::new();
    for record in rdr.deserialize::<DeviceProfile>() {
        match record {
            Ok(p) => fleet.push(p),
            Err(err) => {
                let line = err.position().map(|p| p.line()).unwrap_or(0);
                return Err(Error::Parse {
                    path: path.to_path_buf(),
                    line,
                    message: err.to_string(),
                });
            }
        }
    }
    Ok(fleet)
}

pub fn write_fleet_csv<W: Write>(writer: W, profiles: &[DeviceProfile]) -> Result<()> {
    let mut wtr = csv::Writer::from_writer(writer);
    for p in profiles {
        wtr.serialize(p)?;
    }
    wtr.flush().map_err(|e| Error::io("<fleet csv>", e))?;
    Ok(())
}
