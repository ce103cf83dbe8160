use serde::{Deserialize, Serialize};

use super::{AgentTraits, SimError};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum LonelinessBand {
    Low = 0,
    Moderate = 1,
    ModeratelyHigh = 2,
    High = 3,
}

impl LonelinessBand {
    pub const ALL: [LonelinessBand; 4] = [
        LonelinessBand::Low,
        LonelinessBand::Moderate,
        LonelinessBand::ModeratelyHigh,
        LonelinessBand::High,
    ];

    pub fn label(self) -> &'static str {
        match self {
            LonelinessBand::Low => "low",
            LonelinessBand::Moderate => "moderate",
            LonelinessBand::ModeratelyHigh => "moderately-high",
            LonelinessBand::High => "high",
        }
    }
}

/// Connectedness score `time / time_scale + circle / circle_scale`, cut at
/// three descending thresholds. A score equal to a threshold falls in the
/// less lonely band.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct LonelinessParams {
    pub time_scale: f64,
    pub circle_scale: f64,
    pub low_at: f64,
    pub moderate_at: f64,
    pub moderately_high_at: f64,
}

impl Default for LonelinessParams {
    fn default() -> Self {
        Self {
            time_scale: 10.0,
            circle_scale: 10.0,
            low_at: 1.5,
            moderate_at: 1.0,
            moderately_high_at: 0.5,
        }
    }
}

impl LonelinessParams {
    pub fn validate(&self) -> Result<(), SimError> {
        let ok = self.time_scale > 0.0
            && self.circle_scale > 0.0
            && self.low_at > self.moderate_at
            && self.moderate_at > self.moderately_high_at
            && self.moderately_high_at > 0.0
            && self.low_at.is_finite();
        if ok {
            Ok(())
        } else {
            Err(SimError::InvalidConfig(
                "loneliness scales must be positive and thresholds strictly descending".into(),
            ))
        }
    }

    pub fn score(&self, weekly_hours: f64, circle: usize) -> f64 {
        weekly_hours / self.time_scale + circle as f64 / self.circle_scale
    }
}

pub fn loneliness_proxy(agent: &AgentTraits, params: &LonelinessParams) -> LonelinessBand {
    let s = params.score(agent.weekly_social_time, agent.circle.len());
    if s >= params.low_at {
        LonelinessBand::Low
    } else if s >= params.moderate_at {
        LonelinessBand::Moderate
    } else if s >= params.moderately_high_at {
        LonelinessBand::ModeratelyHigh
    } else {
        LonelinessBand::High
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::socialgraph::UserId;

    fn agent(hours: f64, circle: usize) -> AgentTraits {
        AgentTraits {
            sociability: 0.5,
            responsiveness: 0.5,
            weekly_social_time: hours,
            circle: (0..circle).map(|i| UserId::from(format!("f{i}"))).collect(),
        }
    }

    #[test]
    fn extremes_and_ties() {
        let p = LonelinessParams::default();
        assert_eq!(loneliness_proxy(&agent(0.0, 0), &p), LonelinessBand::High);
        assert_eq!(loneliness_proxy(&agent(168.0, 500), &p), LonelinessBand::Low);
        // score exactly 1.0 sits on the moderate threshold
        assert_eq!(loneliness_proxy(&agent(5.0, 5), &p), LonelinessBand::Moderate);
        assert_eq!(loneliness_proxy(&agent(5.0, 0), &p), LonelinessBand::ModeratelyHigh);
        assert_eq!(loneliness_proxy(&agent(4.0, 0), &p), LonelinessBand::High);
    }

    #[test]
    fn monotone_in_both_inputs() {
        let p = LonelinessParams::default();
        for h in 0..30 {
            for c in 0..30 {
                let b = loneliness_proxy(&agent(h as f64, c), &p);
                assert!(loneliness_proxy(&agent(h as f64 + 1.0, c), &p) <= b);
                assert!(loneliness_proxy(&agent(h as f64, c + 1), &p) <= b);
            }
        }
    }
}
