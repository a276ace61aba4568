//! Project configuration: loading, validation, dotted-path overrides and the
//! provenance hash.

use std::path::PathBuf;

use serde::{Deserialize, Serialize};
use serde_json::Value;
use sha2::{Digest, Sha256};

use crate::defaults;
use crate::drive::{DriveConfig, LeadLagSpec};
use crate::fl::VEL_FILTER_FACTOR;
use crate::plant::ActuatorParams;
use crate::position::Arch;
use crate::sim::SimConfig;
use crate::{check_positive, Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ControlConfig {
    pub arch: Arch,
    pub omega_n_hz: f64,
    pub zeta: f64,
    /// Observer poles sit at this multiple of `ω_n`.
    pub estimator_speed_factor: f64,
    /// Reduced-order observer pole, rad/s; `estimator_speed_factor·ω_n`
    /// when absent.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub lambda0: Option<f64>,
    /// Feedback-linearization velocity filter cutoff over `ω_n`.
    #[serde(default = "default_vel_filter_factor")]
    pub vel_filter_factor: f64,
}

fn default_vel_filter_factor() -> f64 {
    VEL_FILTER_FACTOR
}

impl ControlConfig {
    pub fn omega_n(&self) -> f64 {
        2.0 * std::f64::consts::PI * self.omega_n_hz
    }

    pub fn lambda0(&self) -> f64 {
        self.lambda0.unwrap_or(self.estimator_speed_factor * self.omega_n())
    }

    /// Returns advisory warnings; hard errors carry the field path.
    pub fn validate(&self, path: &str) -> Result<Vec<String>> {
        check_positive(&format!("{path}.omega_n_hz"), self.omega_n_hz)?;
        check_positive(&format!("{path}.estimator_speed_factor"), self.estimator_speed_factor)?;
        check_positive(&format!("{path}.vel_filter_factor"), self.vel_filter_factor)?;
        if !(self.zeta > 0.0 && self.zeta <= 1.0) {
            return Err(Error::config(format!("{path}.zeta"), format!("must lie in (0, 1], got {}", self.zeta)));
        }
        if let Some(l) = self.lambda0 {
            check_positive(&format!("{path}.lambda0"), l)?;
        }
        let mut warnings = Vec::new();
        if !(5.0..=10.0).contains(&self.estimator_speed_factor) {
            warnings.push(format!(
                "{path}.estimator_speed_factor = {} is outside the usual range [5, 10]",
                self.estimator_speed_factor
            ));
        }
        Ok(warnings)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProjectConfig {
    pub actuator: ActuatorParams,
    pub drive: DriveConfig,
    #[serde(default = "defaults::lead_lag_spec")]
    pub lead_lag: LeadLagSpec,
    pub control: ControlConfig,
    pub sim: SimConfig,
    pub output_dir: PathBuf,
}

impl Default for ProjectConfig {
    fn default() -> Self {
        Self {
            actuator: defaults::actuator_params(),
            drive: defaults::drive_config(),
            lead_lag: defaults::lead_lag_spec(),
            control: ControlConfig {
                arch: Arch::CurrentDrive,
                omega_n_hz: defaults::CURRENT_DRIVE_FN_HZ,
                zeta: defaults::ZETA,
                estimator_speed_factor: defaults::ESTIMATOR_SPEED_FACTOR,
                lambda0: None,
                vel_filter_factor: VEL_FILTER_FACTOR,
            },
            sim: defaults::sim_config(),
            output_dir: PathBuf::from("out"),
        }
    }
}

impl ProjectConfig {
    /// Parses JSON, reporting the offending field path on failure.
    pub fn from_json(text: &str) -> Result<Self> {
        let de = &mut serde_json::Deserializer::from_str(text);
        serde_path_to_error::deserialize(de).map_err(|e| {
            let path = e.path().to_string();
            Error::config(if path == "." { String::from("<root>") } else { path }, e.inner().to_string())
        })
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("config serializes")
    }

    /// Checks every sub-configuration; returns advisory warnings.
    pub fn validate(&self) -> Result<Vec<String>> {
        self.actuator.validate("actuator")?;
        self.drive.validate("drive")?;
        for (name, v) in [("f_c", self.lead_lag.f_c), ("r_1", self.lead_lag.r_1), ("r_2", self.lead_lag.r_2)] {
            check_positive(&format!("lead_lag.{name}"), v)?;
        }
        if !(self.lead_lag.alpha > 1.0) {
            return Err(Error::config("lead_lag.alpha", format!("must exceed 1, got {}", self.lead_lag.alpha)));
        }
        self.sim.validate("sim")?;
        self.control.validate("control")
    }

    /// Applies `a.b.c=value` assignments. Values parse as JSON when they
    /// can, otherwise as strings; the path must already exist.
    pub fn with_overrides<S: AsRef<str>>(&self, overrides: &[S]) -> Result<Self> {
        let mut v = serde_json::to_value(self).expect("config serializes");
        for o in overrides {
            let o = o.as_ref();
            let (path, raw) = o
                .split_once('=')
                .ok_or_else(|| Error::config(o, "override must have the form key=value"))?;
            let new = serde_json::from_str(raw).unwrap_or_else(|_| Value::String(raw.to_string()));
            let slot = path
                .split('.')
                .try_fold(&mut v, |node, key| match node {
                    Value::Object(m) => m.get_mut(key),
                    Value::Array(a) => key.parse::<usize>().ok().and_then(move |i| a.get_mut(i)),
                    _ => None,
                });
            match slot {
                Some(s) => *s = new,
                None => {
                    // optional fields are absent when unset
                    let (parent, leaf) = path.rsplit_once('.').unwrap_or(("", path));
                    let obj = if parent.is_empty() {
                        Some(&mut v)
                    } else {
                        parent.split('.').try_fold(&mut v, |node, key| node.get_mut(key))
                    };
                    match obj {
                        Some(Value::Object(m)) if is_optional_field(path) => {
                            m.insert(leaf.to_string(), new);
                        }
                        _ => return Err(Error::config(path, "no such configuration field")),
                    }
                }
            }
        }
        let text = serde_json::to_string(&v).expect("value serializes");
        Self::from_json(&text)
    }

    /// SHA-256 of the compact JSON form, hex encoded.
    pub fn hash(&self) -> String {
        let text = serde_json::to_string(self).expect("config serializes");
        hex::encode(Sha256::digest(text.as_bytes()))
    }
}

fn is_optional_field(path: &str) -> bool {
    matches!(path, "control.lambda0" | "drive.r_lg")
}
