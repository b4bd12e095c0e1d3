//! Scenario configuration: device and UAV parameters plus the global
//! environment settings, serialized as JSON scenario files.

use rand::Rng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use std::path::Path;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("invalid scenario: {0}")]
    Invalid(String),
    #[error("failed to read scenario {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("failed to parse scenario {path}: {source}")]
    Parse {
        path: String,
        #[source]
        source: serde_json::Error,
    },
}

/// How the per-packet weight exponent is computed.
///
/// `PaperLiteral` uses the generation *period index* `n` in the exponent
/// (weights of slow-generating devices decay with absolute time);
/// `GenerationTime` uses the generation *interval* `n*k_i` (weights depend
/// only on packet age).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum WeightMode {
    #[default]
    PaperLiteral,
    GenerationTime,
}

/// One IoT device: fixed position, generation period, and link parameters.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct DeviceConfig {
    pub id: usize,
    /// Position in meters within `[0, area_x] x [0, area_y]`.
    pub pos_x: f64,
    pub pos_y: f64,
    /// Generates a packet every `gen_period_k` intervals.
    pub gen_period_k: u32,
    /// Allocated bandwidth in Hz.
    pub bandwidth: f64,
    /// Transmit power in Watts.
    pub tx_power: f64,
}

/// One UAV: constant altitude, speed, and flight-time budget.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct UavConfig {
    pub id: usize,
    /// Altitude in meters; must be pairwise distinct across UAVs.
    pub altitude: f64,
    /// Flight speed in meters per second.
    pub speed: f64,
    /// Flight-time budget in seconds; unit moves cost `grid_step / speed`.
    pub max_flight_time: f64,
    /// Starting grid cell `[cx, cy]`.
    pub start_cell: [u32; 2],
}

/// Full scenario description. Serialized as a JSON document under
/// `scenarios/`; device layouts are either listed explicitly or generated
/// uniformly from `rng_seed` when `devices` is empty.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct EnvConfig {
    pub num_devices: usize,
    pub num_uavs: usize,
    /// Area extent in meters.
    pub area_x: f64,
    pub area_y: f64,
    /// Grid granularity in meters; must divide both area extents.
    pub grid_step: f64,
    /// Number of decision intervals per episode.
    pub horizon: u32,
    /// Interval duration in seconds; ages are integer multiples of it.
    pub interval_len: f64,
    /// Rician factor (LoS-to-NLoS power ratio).
    pub rician_factor: f64,
    /// When set, the channel is the deterministic pure line-of-sight limit.
    #[serde(default)]
    pub pure_los: bool,
    /// Noise power in Watts.
    pub noise_power: f64,
    /// Minimum data rate in bits/second for a collection to be granted.
    pub min_rate: f64,
    /// Weight decay factor in `[0, 1]`.
    pub aoi_weight_gamma: f64,
    #[serde(default)]
    pub weight_mode: WeightMode,
    #[serde(default)]
    pub devices: Vec<DeviceConfig>,
    pub uavs: Vec<UavConfig>,
    pub rng_seed: u64,
}

impl EnvConfig {
    /// Number of grid positions along x (lattice points, inclusive bounds).
    pub fn grid_nx(&self) -> u32 {
        (self.area_x / self.grid_step).round() as u32 + 1
    }

    /// Number of grid positions along y.
    pub fn grid_ny(&self) -> u32 {
        (self.area_y / self.grid_step).round() as u32 + 1
    }

    pub fn num_cells(&self) -> u32 {
        self.grid_nx() * self.grid_ny()
    }

    /// Maximum number of unit moves UAV `u` can afford within its budget.
    pub fn max_moves(&self, u: usize) -> u32 {
        let uav = &self.uavs[u];
        let per_move = self.grid_step / uav.speed;
        ((uav.max_flight_time / per_move) + 1e-9).floor() as u32
    }

    /// Highest generation index a device can reach within the horizon.
    pub fn max_gen_index(&self, gen_period_k: u32) -> u32 {
        self.horizon / gen_period_k
    }

    /// Loads a scenario file and materializes generated device layouts.
    pub fn load(path: &Path) -> Result<Self, ConfigError> {
        let text = std::fs::read_to_string(path).map_err(|source| ConfigError::Io {
            path: path.display().to_string(),
            source,
        })?;
        let mut cfg: EnvConfig =
            serde_json::from_str(&text).map_err(|source| ConfigError::Parse {
                path: path.display().to_string(),
                source,
            })?;
        cfg.materialize()?;
        Ok(cfg)
    }

    pub fn save(&self, path: &Path) -> Result<(), ConfigError> {
        let text = serde_json::to_string_pretty(self).expect("config serializes");
        std::fs::write(path, text).map_err(|source| ConfigError::Io {
            path: path.display().to_string(),
            source,
        })
    }

    /// Fills in a uniform random device layout when none is listed, then
    /// validates all invariants.
    pub fn materialize(&mut self) -> Result<(), ConfigError> {
        if self.devices.is_empty() && self.num_devices > 0 {
            self.devices = generate_devices(self);
        }
        self.validate()
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        let fail = |msg: String| Err(ConfigError::Invalid(msg));
        if self.grid_step <= 0.0 || self.area_x <= 0.0 || self.area_y <= 0.0 {
            return fail("area and grid_step must be positive".into());
        }
        for (name, extent) in [("area_x", self.area_x), ("area_y", self.area_y)] {
            let ratio = extent / self.grid_step;
            if (ratio - ratio.round()).abs() > 1e-9 {
                return fail(format!("grid_step must divide {name}"));
            }
        }
        if self.horizon == 0 {
            return fail("horizon must be at least 1".into());
        }
        if self.interval_len <= 0.0 {
            return fail("interval_len must be positive".into());
        }
        if !(0.0..=1.0).contains(&self.aoi_weight_gamma) {
            return fail("aoi_weight_gamma must lie in [0, 1]".into());
        }
        if self.rician_factor < 0.0 {
            return fail("rician_factor must be nonnegative".into());
        }
        if self.noise_power <= 0.0 {
            return fail("noise_power must be positive".into());
        }
        if self.devices.len() != self.num_devices {
            return fail(format!(
                "num_devices = {} but {} devices listed",
                self.num_devices,
                self.devices.len()
            ));
        }
        if self.uavs.len() != self.num_uavs || self.num_uavs == 0 {
            return fail(format!(
                "num_uavs = {} but {} uavs listed",
                self.num_uavs,
                self.uavs.len()
            ));
        }
        for (i, d) in self.devices.iter().enumerate() {
            if d.id != i {
                return fail(format!("device ids must be 0..I in order, got {}", d.id));
            }
            // Periods beyond the horizon are allowed: such a device simply
            // never generates within the episode.
            if d.gen_period_k == 0 {
                return fail(format!("device {} gen_period_k must be positive", d.id));
            }
            if d.bandwidth <= 0.0 {
                return fail(format!("device {} bandwidth must be positive", d.id));
            }
            if d.tx_power < 0.0 {
                return fail(format!("device {} tx_power must be nonnegative", d.id));
            }
            if !(0.0..=self.area_x).contains(&d.pos_x) || !(0.0..=self.area_y).contains(&d.pos_y) {
                return fail(format!("device {} position outside area", d.id));
            }
        }
        for (u, uav) in self.uavs.iter().enumerate() {
            if uav.id != u {
                return fail(format!("uav ids must be 0..U in order, got {}", uav.id));
            }
            if uav.speed <= 0.0 || uav.max_flight_time <= 0.0 || uav.altitude <= 0.0 {
                return fail(format!(
                    "uav {} speed, altitude and max_flight_time must be positive",
                    uav.id
                ));
            }
            if uav.start_cell[0] >= self.grid_nx() || uav.start_cell[1] >= self.grid_ny() {
                return fail(format!("uav {} start_cell outside grid", uav.id));
            }
        }
        for a in 0..self.uavs.len() {
            for b in (a + 1)..self.uavs.len() {
                if (self.uavs[a].altitude - self.uavs[b].altitude).abs() < 1e-9 {
                    return fail("uav altitudes must be pairwise distinct".into());
                }
            }
        }
        Ok(())
    }
}

/// Uniform random layout drawn from `rng_seed`: positions uniform over the
/// area, generation periods uniform in `[1, min(5, horizon)]`, bandwidth in
/// `[1.5, 2]` GHz, transmit power in `[0.1, 1]` mW (floor above zero so every
/// device is physically collectable).
fn generate_devices(cfg: &EnvConfig) -> Vec<DeviceConfig> {
    use rand::SeedableRng;
    let mut rng = ChaCha8Rng::seed_from_u64(crate::derive_seed(cfg.rng_seed, 0xd01));
    let k_max = cfg.horizon.min(5).max(1);
    (0..cfg.num_devices)
        .map(|id| DeviceConfig {
            id,
            pos_x: rng.gen_range(0.0..=cfg.area_x),
            pos_y: rng.gen_range(0.0..=cfg.area_y),
            gen_period_k: rng.gen_range(1..=k_max),
            bandwidth: rng.gen_range(1.5e9..=2.0e9),
            tx_power: rng.gen_range(1.0e-4..=1.0e-3),
            })
        .collect()
}
