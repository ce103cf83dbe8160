//! Declarative reward configuration (TOML).
//!
//! ```toml
//! alpha = 0.6          # edge-weight share of the total reward
//! q1 = 1.0             # edge-weight ceiling
//! p1 = 0.8             # edge-weight steepness
//! c1 = 5.0             # task count at half ceiling
//! mission_prop = "ration"
//!
//! [[surprise]]         # drawn once per outdoor tick; leftover mass grants nothing
//! prop = "toy"
//! probability = 0.02
//!
//! [[surprise]]
//! physical = "keychain"
//! probability = 0.005
//!
//! [[milestones]]
//! kind = "tasks_completed"   # or "pet_age_days"
//! threshold = 10
//! badge = "10-tasks"
//! ```

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use super::RewardParams;
use crate::socialgraph::PropId;

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("cannot read {}: {source}", path.display())]
    Io {
        path: PathBuf,
        source: std::io::Error,
    },
    #[error("malformed reward config: {0}")]
    Parse(#[from] toml::de::Error),
    #[error("invalid reward config: {0}")]
    Invalid(String),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SurpriseEntry {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub prop: Option<PropId>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub physical: Option<String>,
    pub probability: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MilestoneKind {
    TasksCompleted,
    PetAgeDays,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Milestone {
    pub kind: MilestoneKind,
    pub threshold: u64,
    pub badge: String,
}

fn default_mission_prop() -> PropId {
    PropId::from("ration")
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RewardConfig {
    pub alpha: f64,
    pub q1: f64,
    pub p1: f64,
    pub c1: f64,
    /// Prop granted for a completed task that names none itself.
    #[serde(default = "default_mission_prop")]
    pub mission_prop: PropId,
    #[serde(default)]
    pub surprise: Vec<SurpriseEntry>,
    #[serde(default)]
    pub milestones: Vec<Milestone>,
}

impl Default for RewardConfig {
    fn default() -> Self {
        let p = RewardParams::default();
        let milestone = |kind, threshold, badge: &str| Milestone {
            kind,
            threshold,
            badge: badge.to_owned(),
        };
        Self {
            alpha: p.alpha,
            q1: p.q1,
            p1: p.p1,
            c1: p.c1,
            mission_prop: default_mission_prop(),
            surprise: vec![
                SurpriseEntry {
                    prop: Some("ration".into()),
                    physical: None,
                    probability: 0.05,
                },
                SurpriseEntry {
                    prop: Some("toy".into()),
                    physical: None,
                    probability: 0.02,
                },
                SurpriseEntry {
                    prop: None,
                    physical: Some("keychain".into()),
                    probability: 0.005,
                },
            ],
            milestones: vec![
                milestone(MilestoneKind::TasksCompleted, 1, "first-task"),
                milestone(MilestoneKind::TasksCompleted, 10, "10-tasks"),
                milestone(MilestoneKind::TasksCompleted, 50, "50-tasks"),
                milestone(MilestoneKind::PetAgeDays, 7, "pet-1-week"),
                milestone(MilestoneKind::PetAgeDays, 30, "pet-1-month"),
            ],
        }
    }
}

impl RewardConfig {
    pub fn from_toml_str(text: &str) -> Result<Self, ConfigError> {
        let cfg: Self = toml::from_str(text)?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self, ConfigError> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|source| ConfigError::Io {
            path: path.to_owned(),
            source,
        })?;
        Self::from_toml_str(&text)
    }

    pub fn to_toml_string(&self) -> String {
        toml::to_string(self).expect("reward config serializes")
    }

    pub fn params(&self) -> RewardParams {
        RewardParams {
            alpha: self.alpha,
            q1: self.q1,
            p1: self.p1,
            c1: self.c1,
        }
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        self.params()
            .validate()
            .map_err(|e| ConfigError::Invalid(e.to_string()))?;
        let mut total = 0.0;
        for (i, s) in self.surprise.iter().enumerate() {
            if s.prop.is_some() == s.physical.is_some() {
                return Err(ConfigError::Invalid(format!(
                    "surprise entry {i} must name exactly one of `prop` or `physical`"
                )));
            }
            if !(s.probability.is_finite() && s.probability >= 0.0) {
                return Err(ConfigError::Invalid(format!(
                    "surprise entry {i} has probability {}",
                    s.probability
                )));
            }
            total += s.probability;
        }
        if total > 1.0 + 1e-9 {
            return Err(ConfigError::Invalid(format!(
                "surprise probabilities sum to {total} > 1"
            )));
        }
        for m in &self.milestones {
            if m.threshold == 0 || m.badge.is_empty() {
                return Err(ConfigError::Invalid(format!(
                    "milestone `{}` needs a positive threshold and a badge name",
                    m.badge
                )));
            }
        }
        Ok(())
    }

    /// Maps a uniform draw in `[0, 1)` onto the surprise table.
    pub fn surprise_for(&self, uniform: f64) -> Option<&SurpriseEntry> {
        let mut acc = 0.0;
        for s in &self.surprise {
            acc += s.probability;
            if uniform < acc {
                return Some(s);
            }
        }
        None
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_documented_example() {
        let text = r#"
alpha = 0.6
q1 = 1.0
p1 = 0.8
c1 = 5.0
mission_prop = "ration"

[[surprise]]
prop = "toy"
probability = 0.02

[[surprise]]
physical = "keychain"
probability = 0.005

[[milestones]]
kind = "tasks_completed"
threshold = 10
badge = "10-tasks"
"#;
        let cfg = RewardConfig::from_toml_str(text).unwrap();
        assert_eq!(cfg.surprise.len(), 2);
        assert_eq!(cfg.milestones[0].kind, MilestoneKind::TasksCompleted);
        assert_eq!(cfg.params(), RewardParams::new(0.6, 1.0, 0.8, 5.0).unwrap());
        let again = RewardConfig::from_toml_str(&cfg.to_toml_string()).unwrap();
        assert_eq!(cfg, again);
    }

    #[test]
    fn rejects_invalid_tables() {
        let base = "alpha = 0.5\nq1 = 1.0\np1 = 1.0\nc1 = 1.0\n";
        let over = format!("{base}[[surprise]]\nprop = \"a\"\nprobability = 0.7\n[[surprise]]\nprop = \"b\"\nprobability = 0.4\n");
        assert!(matches!(
            RewardConfig::from_toml_str(&over),
            Err(ConfigError::Invalid(_))
        ));
        let both = format!("{base}[[surprise]]\nprop = \"a\"\nphysical = \"b\"\nprobability = 0.1\n");
        assert!(RewardConfig::from_toml_str(&both).is_err());
        let q1 = "alpha = 0.5\nq1 = 0.0\np1 = 1.0\nc1 = 1.0\n";
        assert!(RewardConfig::from_toml_str(q1).is_err());
        assert!(RewardConfig::from_toml_str("alpha = 0.5\nbogus = 1\n").is_err());
    }

    #[test]
    fn surprise_lookup_is_cumulative() {
        let cfg = RewardConfig::default();
        assert_eq!(cfg.surprise_for(0.0).unwrap().prop, Some("ration".into()));
        assert_eq!(cfg.surprise_for(0.06).unwrap().prop, Some("toy".into()));
        assert_eq!(
            cfg.surprise_for(0.072).unwrap().physical.as_deref(),
            Some("keychain")
        );
        assert!(cfg.surprise_for(0.5).is_none());
    }
}
