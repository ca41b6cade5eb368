//! JSON experiment configuration.
//!
//! ```json
//! {
//!   "eta": 0.2, "phi_deg": 30.0, "theta_deg": 180.0, "visibility": 1.0,
//!   "pairs_per_setting": 1000000, "seed": 42,
//!   "angles_deg": { "a": 0, "a_prime": 60, "b": 120, "b_prime": 60, "r": 0, "s": 0 }
//! }
//! ```

use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{Angle, DetectionGeometry};
use crate::qm_model::{ExperimentConfig, Settings};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AnglesDeg {
    pub a: f64,
    pub a_prime: f64,
    pub b: f64,
    pub b_prime: f64,
    pub r: f64,
    pub s: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ConfigFile {
    pub eta: f64,
    pub phi_deg: f64,
    #[serde(default = "default_theta")]
    pub theta_deg: f64,
    #[serde(default = "default_visibility")]
    pub visibility: f64,
    pub pairs_per_setting: u64,
    pub seed: u64,
    pub angles_deg: AnglesDeg,
}

fn default_theta() -> f64 {
    180.0
}

fn default_visibility() -> f64 {
    1.0
}

impl Default for ConfigFile {
    fn default() -> Self {
        ConfigFile::from(&ExperimentConfig::default())
    }
}

impl From<&ExperimentConfig> for ConfigFile {
    fn from(c: &ExperimentConfig) -> Self {
        let s = &c.settings;
        ConfigFile {
            eta: c.eta,
            phi_deg: c.geometry.phi().to_degrees(),
            theta_deg: c.geometry.theta().to_degrees(),
            visibility: c.visibility,
            pairs_per_setting: c.pairs_per_setting,
            seed: c.seed,
            angles_deg: AnglesDeg {
                a: s.a.degrees(),
                a_prime: s.a_prime.degrees(),
                b: s.b.degrees(),
                b_prime: s.b_prime.degrees(),
                r: s.r.degrees(),
                s: s.s.degrees(),
            },
        }
    }
}

fn finite(field: &'static str, v: f64) -> Result<f64> {
    if v.is_finite() {
        Ok(v)
    } else {
        Err(Error::InvalidConfig {
            field,
            reason: format!("must be finite, got {v}"),
        })
    }
}

impl ConfigFile {
    pub fn from_json(text: &str) -> Result<Self> {
        serde_json::from_str(text).map_err(|e| Error::InvalidConfig {
            field: "json",
            reason: e.to_string(),
        })
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(|e| Error::InvalidConfig {
            field: "path",
            reason: format!("{}: {e}", path.display()),
        })?;
        Self::from_json(&text)
    }

    /// Converts to an [`ExperimentConfig`], checking every field and then the
    /// outcome distribution.
    pub fn to_config(&self) -> Result<ExperimentConfig> {
        if !(0.0..=180.0).contains(&self.phi_deg) {
            return Err(Error::InvalidConfig {
                field: "phi_deg",
                reason: format!("must lie in [0, 180], got {}", self.phi_deg),
            });
        }
        if !(0.0..=180.0).contains(&self.theta_deg) {
            return Err(Error::InvalidConfig {
                field: "theta_deg",
                reason: format!("must lie in [0, 180], got {}", self.theta_deg),
            });
        }
        let geometry = DetectionGeometry::from_degrees(self.theta_deg, self.phi_deg)?;
        let ang = &self.angles_deg;
        let settings = Settings {
            a: Angle::from_degrees(finite("angles_deg.a", ang.a)?),
            a_prime: Angle::from_degrees(finite("angles_deg.a_prime", ang.a_prime)?),
            b: Angle::from_degrees(finite("angles_deg.b", ang.b)?),
            b_prime: Angle::from_degrees(finite("angles_deg.b_prime", ang.b_prime)?),
            r: Angle::from_degrees(finite("angles_deg.r", ang.r)?),
            s: Angle::from_degrees(finite("angles_deg.s", ang.s)?),
        };
        let config = ExperimentConfig {
            eta: self.eta,
            geometry,
            visibility: self.visibility,
            settings,
            pairs_per_setting: self.pairs_per_setting,
            seed: self.seed,
        };
        config.ensure_valid()?;
        Ok(config)
    }
}
