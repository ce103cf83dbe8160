use std::path::Path;

use serde::{Deserialize, Serialize};

use super::{LonelinessParams, SimError};
use crate::recommend::RecommendParams;
use crate::rewards::RewardConfig;

/// Experiment parameters. Every field has a default, so a TOML file only
/// needs the values it changes; `[reward]` uses the reward config format.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SimConfig {
    pub population: usize,
    pub treatment: usize,
    pub control: usize,
    pub weeks: usize,
    /// Tasks the platform offers each treatment agent per week; 0 disables
    /// the mechanism.
    pub tasks_per_week: usize,
    pub seed: u64,
    /// Side of the square area agents live in.
    pub area_km: f64,
    pub center_lat: f64,
    pub center_lon: f64,
    pub attribute_dims: usize,
    pub preference_dims: usize,
    /// Weekly hours at sociability 1 before any meetups.
    pub base_hours: f64,
    pub hours_per_meetup: f64,
    /// Chances per week for an agent to start a meetup on their own.
    pub organic_slots: usize,
    /// Per-slot meetup probability at sociability 1.
    pub organic_rate: f64,
    /// Share of organic meetups spent on an existing friend.
    pub reconnect_prob: f64,
    pub reward: RewardConfig,
    pub recommend: RecommendParams,
    pub loneliness: LonelinessParams,
}

impl Default for SimConfig {
    fn default() -> Self {
        Self {
            population: 400,
            treatment: 200,
            control: 200,
            weeks: 12,
            tasks_per_week: 2,
            seed: 42,
            area_km: 8.0,
            center_lat: 31.23,
            center_lon: 121.47,
            attribute_dims: 3,
            preference_dims: 5,
            base_hours: 2.0,
            hours_per_meetup: 1.5,
            organic_slots: 3,
            organic_rate: 0.3,
            reconnect_prob: 0.6,
            reward: RewardConfig::default(),
            recommend: RecommendParams::default(),
            loneliness: LonelinessParams::default(),
        }
    }
}

fn invalid(msg: impl Into<String>) -> SimError {
    SimError::InvalidConfig(msg.into())
}

impl SimConfig {
    pub fn validate(&self) -> Result<(), SimError> {
        if self.treatment + self.control != self.population {
            return Err(invalid(format!(
                "treatment ({}) + control ({}) must equal population ({})",
                self.treatment, self.control, self.population
            )));
        }
        if self.population > 1_000_000 {
            return Err(invalid("population above 1000000"));
        }
        if self.weeks > u32::MAX as usize {
            return Err(invalid("too many weeks"));
        }
        let unit = |name: &str, v: f64| {
            if (0.0..=1.0).contains(&v) {
                Ok(())
            } else {
                Err(invalid(format!("{name} must lie in [0, 1], got {v}")))
            }
        };
        unit("organic_rate", self.organic_rate)?;
        unit("reconnect_prob", self.reconnect_prob)?;
        for (name, v) in [
            ("area_km", self.area_km),
            ("base_hours", self.base_hours),
            ("hours_per_meetup", self.hours_per_meetup),
        ] {
            if !(v.is_finite() && v >= 0.0) {
                return Err(invalid(format!("{name} must be a non-negative number")));
            }
        }
        if !(self.center_lat.abs() < 90.0 && self.center_lon.abs() <= 180.0) {
            return Err(invalid("center must be a valid coordinate away from the poles"));
        }
        self.reward
            .validate()
            .map_err(|e| invalid(format!("reward: {e}")))?;
        self.recommend.validate()?;
        self.loneliness.validate()?;
        Ok(())
    }

    pub fn from_toml_str(text: &str) -> Result<Self, SimError> {
        let cfg: Self = toml::from_str(text).map_err(|e| SimError::Parse {
            path: "<string>".into(),
            message: e.to_string(),
        })?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self, SimError> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|source| SimError::Io {
            path: path.display().to_string(),
            source,
        })?;
        let cfg: Self = toml::from_str(&text).map_err(|e| SimError::Parse {
            path: path.display().to_string(),
            message: e.to_string(),
        })?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn to_toml_string(&self) -> String {
        toml::to_string(self).expect("config serializes")
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn partial_file_keeps_defaults() {
        let cfg = SimConfig::from_toml_str("weeks = 3\n[recommend]\nsim_threshold = 0.5\ndist_threshold_km = 5.0\nalpha_net = 0.5\ntop_n = 5\nstability_window = 4\nstability_rate = 0.05\n").unwrap();
        assert_eq!(cfg.weeks, 3);
        assert_eq!(cfg.recommend.sim_threshold, 0.5);
        assert_eq!(cfg.population, 400);
    }

    #[test]
    fn round_trip() {
        let cfg = SimConfig::default();
        assert_eq!(SimConfig::from_toml_str(&cfg.to_toml_string()).unwrap(), cfg);
    }

    #[test]
    fn split_must_add_up() {
        let err = SimConfig::from_toml_str("population = 10\ntreatment = 5\ncontrol = 4\n").unwrap_err();
        assert!(err.to_string().contains("must equal population"), "{err}");
        assert!(SimConfig::from_toml_str("colour = 1").is_err());
    }

    #[test]
    fn zero_q1_rejected() {
        let mut cfg = SimConfig::default();
        cfg.reward.q1 = 0.0;
        assert!(cfg.validate().is_err());
    }

    #[test]
    fn missing_file_names_path() {
        let err = SimConfig::load("/no/such/sim.toml").unwrap_err();
        assert!(err.to_string().contains("/no/such/sim.toml"));
    }
}
