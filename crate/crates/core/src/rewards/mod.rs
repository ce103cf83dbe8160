//! Reward computation: logistic edge weights, the per-user total reward, and
//! the reward ledger for the four grant categories.

mod config;
mod ledger;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::socialgraph::{GraphError, SocialGraph, UserId};

pub use config::{ConfigError, Milestone, MilestoneKind, RewardConfig, SurpriseEntry};
pub use ledger::{
    Achievement, RewardCategory, RewardEvent, RewardLedger, RewardPayload, UserRewards,
};

#[derive(Debug, Error, PartialEq)]
pub enum RewardError {
    #[error("invalid reward parameter: {0}")]
    InvalidParams(String),
    #[error("unknown user `{0}`")]
    UnknownUser(UserId),
}

/// Parameters of the total-reward mix and the logistic edge weight.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RewardParams {
    /// Share of the reward coming from edge weights versus collective activities.
    pub alpha: f64,
    /// Ceiling of the edge weight.
    pub q1: f64,
    /// Steepness of the edge weight.
    pub p1: f64,
    /// Task count at which the edge weight reaches half its ceiling.
    pub c1: f64,
}

impl Default for RewardParams {
    fn default() -> Self {
        Self {
            alpha: 0.6,
            q1: 1.0,
            p1: 0.8,
            c1: 5.0,
        }
    }
}

impl RewardParams {
    pub fn new(alpha: f64, q1: f64, p1: f64, c1: f64) -> Result<Self, RewardError> {
        let p = Self { alpha, q1, p1, c1 };
        p.validate()?;
        Ok(p)
    }

    pub fn validate(&self) -> Result<(), RewardError> {
        if !(self.alpha.is_finite() && (0.0..=1.0).contains(&self.alpha)) {
            return Err(RewardError::InvalidParams(format!(
                "alpha = {} not in [0, 1]",
                self.alpha
            )));
        }
        if !(self.q1.is_finite() && self.q1 > 0.0) {
            return Err(RewardError::InvalidParams(format!("q1 = {} must be > 0", self.q1)));
        }
        if !(self.p1.is_finite() && self.p1 > 0.0) {
            return Err(RewardError::InvalidParams(format!("p1 = {} must be > 0", self.p1)));
        }
        if !(self.c1.is_finite() && self.c1 >= 0.0) {
            return Err(RewardError::InvalidParams(format!("c1 = {} must be >= 0", self.c1)));
        }
        Ok(())
    }

    /// Logistic growth of an edge weight with the finished-task count `m`:
    /// `q1 / (1 + exp(-p1 (m - c1)))`. Assumes validated parameters.
    pub fn weight(&self, m: u64) -> f64 {
        self.weight_at(m as f64)
    }

    /// Same curve on a continuous task axis, for plotting.
    pub fn weight_at(&self, m: f64) -> f64 {
        self.q1 / (1.0 + (-self.p1 * (m - self.c1)).exp())
    }

    /// Weight gained by the next finished task on an edge at `m` tasks.
    pub fn marginal_weight(&self, m: u64) -> f64 {
        self.weight(m + 1) - self.weight(m)
    }
}

/// Checked edge weight for `m` finished tasks.
pub fn edge_weight(m: u64, params: &RewardParams) -> Result<f64, RewardError> {
    params.validate()?;
    Ok(params.weight(m))
}

/// Sum of the cached weights of `u`'s incident edges.
pub fn edge_weight_sum(graph: &SocialGraph, u: &UserId) -> Result<f64, RewardError> {
    let edges = graph.incident_edges(u).map_err(|e| match e {
        GraphError::UnknownUser(u) => RewardError::UnknownUser(u),
        other => RewardError::InvalidParams(other.to_string()),
    })?;
    Ok(edges.map(|e| e.weight).sum())
}

/// Total reward `alpha * sum(weights) + (1 - alpha) * activities` of user `u`,
/// with edge weights evaluated under `params`.
pub fn total_reward(
    graph: &SocialGraph,
    u: &UserId,
    params: &RewardParams,
) -> Result<f64, RewardError> {
    params.validate()?;
    let edges: f64 = graph
        .incident_edges(u)
        .map_err(|_| RewardError::UnknownUser(u.clone()))?
        .map(|e| params.weight(e.tasks))
        .sum();
    let activities = graph
        .user(u)
        .map_err(|_| RewardError::UnknownUser(u.clone()))?
        .activity_count as f64;
    Ok(params.alpha * edges + (1.0 - params.alpha) * activities)
}
