//! Run configuration: one flat TOML table.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::conflict::{ConflictPolicy, ConflictTiming, SharedNodeRule};
use crate::error::{Error, Result};
use crate::experiments::ExperimentConfig;
use crate::geometry::{build_layout, Circulation, ClearanceSpec, SphereLayout};
use crate::sensitivity::{McConfig, TargetSet};

/// Everything a run needs. Only `radius_m` and `d_min_m` are required.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Config {
    pub radius_m: f64,
    pub d_min_m: f64,
    #[serde(default = "default_offset")]
    pub equatorial_offset_deg: f64,
    #[serde(default = "default_offset")]
    pub polar_offset_deg: f64,
    #[serde(default)]
    pub circulation: Circulation,

    #[serde(default = "default_rotor")]
    pub rotor_diameter_m: f64,
    #[serde(default = "default_cruise")]
    pub cruise_speed_mps: f64,
    /// Defaults to four rotor diameters.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub lateral_clearance_m: Option<f64>,
    /// Defaults to one and a half rotor diameters.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub vertical_clearance_m: Option<f64>,
    #[serde(default = "default_tube_inner")]
    pub tube_inner_radius_m: f64,
    #[serde(default = "default_tube_buffer")]
    pub tube_buffer_m: f64,

    #[serde(default = "default_spacing")]
    pub max_spacing_m: f64,
    /// Defaults to twice the tube inner radius.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub shared_node_mask_radius_m: Option<f64>,
    #[serde(default)]
    pub shared_node_rule: SharedNodeRule,
    #[serde(default)]
    pub conflict_timing: ConflictTiming,

    #[serde(default = "default_n_uavs")]
    pub n_uavs: Vec<usize>,

    #[serde(default = "default_seed")]
    pub seed: u64,
    #[serde(default = "default_experiments")]
    pub n_experiments: usize,
    #[serde(default = "default_vmin")]
    pub velocity_min_mps: f64,
    #[serde(default = "default_vmax")]
    pub velocity_max_mps: f64,
    #[serde(default = "default_dt")]
    pub dt_s: f64,
    #[serde(default)]
    pub target_set: TargetSet,
    #[serde(default = "default_pool_timing")]
    pub mc_pool_timing: ConflictTiming,

    #[serde(default = "default_tt_speeds")]
    pub travel_time_speeds_mps: Vec<f64>,
    #[serde(default = "default_tt_bin")]
    pub travel_time_bin_s: f64,
}

fn default_offset() -> f64 {
    22.5
}
fn default_rotor() -> f64 {
    1.375
}
fn default_cruise() -> f64 {
    5.0
}
fn default_tube_inner() -> f64 {
    2.0
}
fn default_tube_buffer() -> f64 {
    1.0
}
fn default_spacing() -> f64 {
    0.1
}
fn default_n_uavs() -> Vec<usize> {
    (2..=6).collect()
}
fn default_seed() -> u64 {
    McConfig::default().seed
}
fn default_experiments() -> usize {
    McConfig::default().n_experiments
}
fn default_vmin() -> f64 {
    1.0
}
fn default_vmax() -> f64 {
    5.0
}
fn default_dt() -> f64 {
    0.02
}
fn default_pool_timing() -> ConflictTiming {
    ConflictTiming::Geometric
}
fn default_tt_speeds() -> Vec<f64> {
    vec![1.0, 2.0, 3.0, 4.0, 5.0]
}
fn default_tt_bin() -> f64 {
    5.0
}

impl Config {
    /// Defaults at the given radius and separation.
    pub fn new(radius_m: f64, d_min_m: f64) -> Self {
        let mut c: Config =
            toml::from_str("radius_m = 1.0\nd_min_m = 1.0").expect("defaults parse");
        c.radius_m = radius_m;
        c.d_min_m = d_min_m;
        c
    }

    /// Parses and validates.
    pub fn from_toml_str(text: &str) -> Result<Self> {
        let c: Config = toml::from_str(text).map_err(|e| Error::ConfigParse(e.to_string()))?;
        c.validate()?;
        Ok(c)
    }

    /// Reads a TOML file; parse errors name the file and the offending key.
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::ConfigFile {
            path: path.display().to_string(),
            message: e.to_string(),
        })?;
        let c: Config = toml::from_str(&text).map_err(|e| Error::ConfigFile {
            path: path.display().to_string(),
            message: e.to_string(),
        })?;
        c.validate()?;
        Ok(c)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("config serializes")
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.radius_m > 0.0) || !self.radius_m.is_finite() {
            return Err(Error::config("radius_m", "must be a positive length"));
        }
        if self.n_uavs.is_empty() {
            return Err(Error::config("n_uavs", "must list at least one UAV count"));
        }
        if let Some(n) = self.n_uavs.iter().find(|n| !(2..=6).contains(*n)) {
            return Err(Error::config(
                "n_uavs",
                format!("counts must be in 2..=6, got {n}"),
            ));
        }
        if self.travel_time_speeds_mps.iter().any(|v| !(*v > 0.0)) {
            return Err(Error::config(
                "travel_time_speeds_mps",
                "speeds must be positive",
            ));
        }
        if !(self.travel_time_bin_s > 0.0) {
            return Err(Error::config("travel_time_bin_s", "must be positive"));
        }
        self.clearance()?;
        self.policy().validate()?;
        self.mc().validate()?;
        self.layout()?;
        Ok(())
    }

    pub fn layout(&self) -> Result<SphereLayout> {
        build_layout(
            self.radius_m,
            self.equatorial_offset_deg,
            self.polar_offset_deg,
            self.circulation,
        )
    }

    pub fn clearance(&self) -> Result<ClearanceSpec> {
        ClearanceSpec::new(
            self.rotor_diameter_m,
            self.cruise_speed_mps,
            self.lateral_clearance_m
                .unwrap_or(ClearanceSpec::LATERAL_ROTOR_FACTOR * self.rotor_diameter_m),
            self.vertical_clearance_m
                .unwrap_or(ClearanceSpec::VERTICAL_ROTOR_FACTOR * self.rotor_diameter_m),
            self.tube_inner_radius_m,
            self.tube_buffer_m,
        )
    }

    pub fn policy(&self) -> ConflictPolicy {
        ConflictPolicy {
            d_min_m: self.d_min_m,
            max_spacing_m: self.max_spacing_m,
            shared_node_mask_radius_m: self
                .shared_node_mask_radius_m
                .unwrap_or(2.0 * self.tube_inner_radius_m),
            shared_node_rule: self.shared_node_rule,
            timing: self.conflict_timing,
        }
    }

    pub fn experiment(&self) -> ExperimentConfig {
        ExperimentConfig {
            radius_m: self.radius_m,
            equatorial_offset_deg: self.equatorial_offset_deg,
            polar_offset_deg: self.polar_offset_deg,
            circulation: self.circulation,
            n_uavs: self.n_uavs.clone(),
            policy: self.policy(),
        }
    }

    pub fn mc(&self) -> McConfig {
        McConfig {
            n_experiments: self.n_experiments,
            seed: self.seed,
            velocity_min_mps: self.velocity_min_mps,
            velocity_max_mps: self.velocity_max_mps,
            reference_speed_mps: self.cruise_speed_mps,
            dt_s: self.dt_s,
            target_set: self.target_set,
            pool_timing: self.mc_pool_timing,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn minimal_file_gets_defaults() {
        let c = Config::from_toml_str("radius_m = 13.0\nd_min_m = 3.0\n").unwrap();
        assert_eq!(c.n_uavs, vec![2, 3, 4, 5, 6]);
        assert_eq!(c.policy(), ConflictPolicy::default());
        let cl = c.clearance().unwrap();
        assert_eq!(cl.lateral_clearance_m, 5.5);
        assert_eq!(cl.vertical_clearance_m, 2.0625);
        assert_eq!(c.mc().reference_speed_mps, 5.0);
        assert_eq!(c, Config::new(13.0, 3.0));
    }

    #[test]
    fn missing_required_key_is_named() {
        let e = Config::from_toml_str("d_min_m = 3.0\n")
            .unwrap_err()
            .to_string();
        assert!(e.contains("radius_m"), "{e}");
    }

    #[test]
    fn wrong_type_and_unknown_keys_are_reported() {
        let e = Config::from_toml_str("radius_m = \"big\"\nd_min_m = 3.0\n")
            .unwrap_err()
            .to_string();
        assert!(e.contains("radius_m") && e.contains("invalid type"), "{e}");
        let e = Config::from_toml_str("radius_m = 13.0\nd_min_m = 3.0\nradus = 1\n")
            .unwrap_err()
            .to_string();
        assert!(e.contains("radus"), "{e}");
    }

    #[test]
    fn semantic_errors_name_the_field() {
        let e = Config::from_toml_str("radius_m = -1.0\nd_min_m = 3.0\n").unwrap_err();
        assert!(matches!(
            e,
            Error::Config {
                field: "radius_m",
                ..
            }
        ));
        let e =
            Config::from_toml_str("radius_m = 13.0\nd_min_m = 3.0\nlateral_clearance_m = 2.0\n")
                .unwrap_err();
        assert!(matches!(
            e,
            Error::Config {
                field: "lateral_clearance_m",
                ..
            }
        ));
        let e =
            Config::from_toml_str("radius_m = 13.0\nd_min_m = 3.0\nn_uavs = [7]\n").unwrap_err();
        assert!(matches!(
            e,
            Error::Config {
                field: "n_uavs",
                ..
            }
        ));
    }

    #[test]
    fn round_trips_through_toml() {
        let mut c = Config::new(26.0, 5.0);
        c.conflict_timing = ConflictTiming::Geometric;
        c.circulation = Circulation::Clockwise;
        c.lateral_clearance_m = Some(6.0);
        let back = Config::from_toml_str(&c.to_toml()).unwrap();
        assert_eq!(back, c);
    }
}
