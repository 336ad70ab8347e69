//! Effective simulation configuration: everything that influences the state
//! trajectory. Its hash goes into every log header so replays can refuse a
//! mismatched configuration.

use std::path::Path;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::calibration::CalibrationProfile;
use crate::course::CourseSpec;
use crate::dynamics::VehicleParams;
use crate::fusion::DEFAULT_ALPHA;
use crate::mapping::FullScale;
use crate::vehicle::{PerVehicle, Vehicle};

pub const DEFAULT_TICK_RATE: u32 = 100;
pub const DEFAULT_STALE_THRESHOLD: u64 = 50;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
#[error("config error: {0}")]
pub struct ConfigError(pub String);

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SimConfig {
    /// Ticks per second; the simulation step is `1 / tick_rate`.
    pub tick_rate: u32,
    /// Ticks without an update after which a channel reads as zero.
    pub stale_threshold: u64,
    /// Vehicle selected at session start.
    pub vehicle: Option<Vehicle>,
    pub fusion_alpha: f64,
    pub vehicles: PerVehicle<VehicleParams>,
    pub mapping: PerVehicle<FullScale>,
    pub course: CourseSpec,
    pub calibration: CalibrationProfile,
}

impl Default for SimConfig {
    fn default() -> Self {
        SimConfig {
            tick_rate: DEFAULT_TICK_RATE,
            stale_threshold: DEFAULT_STALE_THRESHOLD,
            vehicle: None,
            fusion_alpha: DEFAULT_ALPHA,
            vehicles: VehicleParams::defaults(),
            mapping: FullScale::defaults(),
            course: CourseSpec::default(),
            calibration: CalibrationProfile::default(),
        }
    }
}

impl SimConfig {
    pub fn dt(&self) -> f64 {
        1.0 / f64::from(self.tick_rate)
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        if self.tick_rate == 0 {
            return Err(ConfigError("tick_rate must be positive".into()));
        }
        if self.stale_threshold == 0 {
            return Err(ConfigError("stale_threshold must be at least 1".into()));
        }
        if !(self.fusion_alpha > 0.0 && self.fusion_alpha <= 1.0) {
            return Err(ConfigError(format!(
                "fusion_alpha {} outside (0, 1]",
                self.fusion_alpha
            )));
        }
        for (v, p) in self.vehicles.iter() {
            p.validate().map_err(|e| ConfigError(format!("{v}: {e}")))?;
        }
        for (v, fs) in self.mapping.iter() {
            if !fs.is_valid() {
                return Err(ConfigError(format!(
                    "{v}: full-scale angles must be positive"
                )));
            }
        }
        self.course
            .build()
            .map_err(|e| ConfigError(format!("course: {e}")))?;
        self.calibration
            .validate()
            .map_err(|e| ConfigError(format!("calibration: {e}")))?;
        Ok(())
    }

    pub fn from_json(text: &str) -> Result<Self, ConfigError> {
        let cfg: SimConfig = serde_json::from_str(text).map_err(|e| ConfigError(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self, ConfigError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| ConfigError(format!("{}: {e}", path.display())))?;
        SimConfig::from_json(&text)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string(self).expect("config serializes")
    }

    /// Hex SHA-256 of the canonical JSON encoding.
    pub fn hash(&self) -> String {
        hex::encode(Sha256::digest(self.to_json().as_bytes()))
    }
}
