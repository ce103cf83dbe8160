//! Friend recommendation.
//!
//! Two phases. The similarity phase gates candidates on profile similarity
//! and geographic distance. Once a region's social circles have settled
//! (few new edges over a sliding window) the network phase scores non-adjacent
//! pairs by the structure of their common-neighbor subgraph plus the
//! similarity of the people involved.

mod components;

use std::cmp::Ordering;
use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::socialgraph::{GraphError, SocialGraph, Timestamp, UserId};

pub use components::UnionFind;

#[derive(Debug, Error, PartialEq)]
pub enum RecommendError {
    #[error("unknown user `{0}`")]
    UnknownUser(UserId),
    #[error("vector lengths differ: {0} vs {1}")]
    DimensionMismatch(usize, usize),
    #[error("`{0}` and `{1}` are already adjacent")]
    Adjacent(UserId, UserId),
    #[error("a user cannot be paired with itself (`{0}`)")]
    SameUser(UserId),
    #[error("`{0}` and `{1}` share no common neighbor")]
    NotApplicable(UserId, UserId),
    #[error("invalid recommendation parameter: {0}")]
    InvalidParams(String),
}

impl From<GraphError> for RecommendError {
    fn from(e: GraphError) -> Self {
        match e {
            GraphError::UnknownUser(u) => Self::UnknownUser(u),
            other => Self::InvalidParams(other.to_string()),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RecommendParams {
    /// Minimum profile similarity in the similarity phase.
    pub sim_threshold: f64,
    /// Maximum great-circle distance in both phases.
    pub dist_threshold_km: f64,
    /// Mix between subgraph structure and similarity in the network score.
    pub alpha_net: f64,
    pub top_n: usize,
    /// Look-back for the new-edge rate, in the graph's time unit.
    pub stability_window: Timestamp,
    /// The network phase starts when the regional new-edge rate drops below this.
    pub stability_rate: f64,
}

impl Default for RecommendParams {
    fn default() -> Self {
        Self {
            sim_threshold: 0.6,
            dist_threshold_km: 5.0,
            alpha_net: 0.5,
            top_n: 5,
            stability_window: 4,
            stability_rate: 0.05,
        }
    }
}

impl RecommendParams {
    pub fn validate(&self) -> Result<(), RecommendError> {
        let unit = |x: f64| x.is_finite() && (0.0..=1.0).contains(&x);
        if !unit(self.sim_threshold) {
            return Err(RecommendError::InvalidParams(format!(
                "sim_threshold = {}",
                self.sim_threshold
            )));
        }
        if !(self.dist_threshold_km.is_finite() && self.dist_threshold_km > 0.0) {
            return Err(RecommendError::InvalidParams(format!(
                "dist_threshold_km = {}",
                self.dist_threshold_km
            )));
        }
        if !unit(self.alpha_net) {
            return Err(RecommendError::InvalidParams(format!(
                "alpha_net = {}",
                self.alpha_net
            )));
        }
        if self.top_n == 0 {
            return Err(RecommendError::InvalidParams("top_n must be positive".into()));
        }
        if !(self.stability_rate.is_finite() && self.stability_rate >= 0.0) {
            return Err(RecommendError::InvalidParams(format!(
                "stability_rate = {}",
                self.stability_rate
            )));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Phase {
    Similarity,
    Network,
}

impl Phase {
    pub fn as_str(self) -> &'static str {
        match self {
            Phase::Similarity => "similarity",
            Phase::Network => "network",
        }
    }
}

/// One connected component of a common-neighbor subgraph.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Component {
    pub vertices: usize,
    pub edges: usize,
    pub members: Vec<UserId>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NetworkScore {
    pub score: f64,
    /// `sum(n_i * (m_i + 1))` over the components.
    pub structure: f64,
    /// Sum of the averaged neighbor similarities plus the pair's own similarity.
    pub affinity: f64,
    pub components: Vec<Component>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Explanation {
    pub similarity: f64,
    pub distance_km: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub structure: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub affinity: Option<f64>,
    /// `(n_i, m_i)` per component.
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub components: Vec<(usize, usize)>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Recommendation {
    pub candidate: UserId,
    pub score: f64,
    pub phase: Phase,
    pub explanation: Explanation,
}

/// Cosine similarity clamped to `[0, 1]`; a zero vector scores 0.
pub fn cosine_similarity(a: &[f64], b: &[f64]) -> Result<f64, RecommendError> {
    if a.len() != b.len() {
        return Err(RecommendError::DimensionMismatch(a.len(), b.len()));
    }
    Ok(cosine(a.iter().copied().zip(b.iter().copied())))
}

fn cosine(pairs: impl Iterator<Item = (f64, f64)>) -> f64 {
    let (mut dot, mut na, mut nb) = (0.0, 0.0, 0.0);
    for (x, y) in pairs {
        dot += x * y;
        na += x * x;
        nb += y * y;
    }
    if na == 0.0 || nb == 0.0 {
        return 0.0;
    }
    (dot / (na.sqrt() * nb.sqrt())).clamp(0.0, 1.0)
}

/// Similarity of two users over their concatenated preference and attribute
/// vectors.
pub fn similarity(graph: &SocialGraph, u: &UserId, v: &UserId) -> Result<f64, RecommendError> {
    let (pu, pv) = (graph.user(u)?, graph.user(v)?);
    let (lu, lv) = (
        pu.preferences.len() + pu.attributes.len(),
        pv.preferences.len() + pv.attributes.len(),
    );
    if lu != lv || pu.preferences.len() != pv.preferences.len() {
        return Err(RecommendError::DimensionMismatch(lu, lv));
    }
    let left = pu.preferences.iter().chain(&pu.attributes).copied();
    let right = pv.preferences.iter().chain(&pv.attributes).copied();
    Ok(cosine(left.zip(right)))
}

fn rank_order(a: &Recommendation, b: &Recommendation) -> Ordering {
    b.score
        .total_cmp(&a.score)
        .then(a.explanation.distance_km.total_cmp(&b.explanation.distance_km))
        .then_with(|| a.candidate.cmp(&b.candidate))
}

/// Similarity-phase candidates: similar enough, close enough, not yet a friend.
pub fn similarity_candidates(
    graph: &SocialGraph,
    u: &UserId,
    params: &RecommendParams,
) -> Result<Vec<Recommendation>, RecommendError> {
    params.validate()?;
    let friends = graph.neighbors(u)?;
    let mut out = Vec::new();
    for v in graph.user_ids() {
        if v == u || friends.contains(v) {
            continue;
        }
        let distance_km = graph.distance_km(u, v)?;
        if distance_km > params.dist_threshold_km {
            continue;
        }
        let sim = similarity(graph, u, v)?;
        if sim < params.sim_threshold {
            continue;
        }
        out.push(Recommendation {
            candidate: v.clone(),
            score: sim,
            phase: Phase::Similarity,
            explanation: Explanation {
                similarity: sim,
                distance_km,
                structure: None,
                affinity: None,
                components: Vec::new(),
            },
        });
    }
    out.sort_by(rank_order);
    out.truncate(params.top_n);
    Ok(out)
}

/// Connected components of the subgraph induced on the common neighbors of
/// a non-adjacent pair. Components are ordered by their smallest member.
pub fn common_neighbor_decomposition(
    graph: &SocialGraph,
    u: &UserId,
    v: &UserId,
) -> Result<Vec<Component>, RecommendError> {
    let (nu, nv) = (graph.neighbors(u)?, graph.neighbors(v)?);
    if u == v {
        return Err(RecommendError::SameUser(u.clone()));
    }
    if nu.contains(v) {
        return Err(RecommendError::Adjacent(u.clone(), v.clone()));
    }
    let common: Vec<&UserId> = nu.intersection(nv).collect();
    let index: BTreeMap<&UserId, usize> = common.iter().enumerate().map(|(i, w)| (*w, i)).collect();
    let mut uf = UnionFind::new(common.len());
    let mut internal_edges = Vec::new();
    for (i, w) in common.iter().enumerate() {
        for x in graph.neighbors(w)? {
            if let Some(&j) = index.get(x) {
                if i < j {
                    uf.union(i, j);
                    internal_edges.push(i);
                }
            }
        }
    }
    let mut groups: BTreeMap<usize, Component> = BTreeMap::new();
    for (i, w) in common.iter().enumerate() {
        let root = uf.find(i);
        let c = groups.entry(root).or_insert_with(|| Component {
            vertices: 0,
            edges: 0,
            members: Vec::new(),
        });
        c.vertices += 1;
        c.members.push((*w).clone());
    }
    for i in internal_edges {
        let root = uf.find(i);
        groups.get_mut(&root).expect("component exists").edges += 1;
    }
    let mut comps: Vec<Component> = groups.into_values().collect();
    comps.sort_by(|a, b| a.members[0].cmp(&b.members[0]));
    Ok(comps)
}

/// Network recommendation value of a non-adjacent pair with at least one
/// common neighbor.
pub fn network_score(
    graph: &SocialGraph,
    u: &UserId,
    v: &UserId,
    params: &RecommendParams,
) -> Result<NetworkScore, RecommendError> {
    let components = common_neighbor_decomposition(graph, u, v)?;
    if components.is_empty() {
        return Err(RecommendError::NotApplicable(u.clone(), v.clone()));
    }
    let structure: f64 = components
        .iter()
        .map(|c| (c.vertices * (c.edges + 1)) as f64)
        .sum();
    let mut affinity = 0.0;
    for c in &components {
        for j in &c.members {
            affinity += (similarity(graph, j, u)? + similarity(graph, j, v)?) / 2.0;
        }
    }
    affinity += similarity(graph, u, v)?;
    let a = params.alpha_net;
    Ok(NetworkScore {
        score: a * structure + (1.0 - a) * affinity,
        structure,
        affinity,
        components,
    })
}

/// Share of the edges touching `u`'s region (users within the distance gate,
/// `u` included) created in the window `(now - stability_window, now]`.
/// `None` when the region has no edges at all.
pub fn regional_edge_rate(
    graph: &SocialGraph,
    u: &UserId,
    params: &RecommendParams,
    now: Timestamp,
) -> Result<Option<f64>, RecommendError> {
    let mut region = BTreeSet::new();
    for v in graph.user_ids() {
        if graph.distance_km(u, v)? <= params.dist_threshold_km {
            region.insert(v);
        }
    }
    let (mut total, mut fresh) = (0usize, 0usize);
    for e in graph.edges() {
        if region.contains(&e.a) || region.contains(&e.b) {
            total += 1;
            if e.created_at.saturating_add(params.stability_window) > now {
                fresh += 1;
            }
        }
    }
    Ok((total > 0).then(|| fresh as f64 / total as f64))
}

pub fn select_phase(
    graph: &SocialGraph,
    u: &UserId,
    params: &RecommendParams,
    now: Timestamp,
) -> Result<Phase, RecommendError> {
    Ok(match regional_edge_rate(graph, u, params, now)? {
        Some(rate) if rate < params.stability_rate => Phase::Network,
        _ => Phase::Similarity,
    })
}

/// Network-phase candidates: non-adjacent users within the distance gate that
/// share at least one neighbor with `u`, ranked by network score.
pub fn network_candidates(
    graph: &SocialGraph,
    u: &UserId,
    params: &RecommendParams,
) -> Result<Vec<Recommendation>, RecommendError> {
    params.validate()?;
    let friends = graph.neighbors(u)?;
    let mut two_hop = BTreeSet::new();
    for w in friends {
        for x in graph.neighbors(w)? {
            if x != u && !friends.contains(x) {
                two_hop.insert(x);
            }
        }
    }
    let mut out = Vec::new();
    for v in two_hop {
        let distance_km = graph.distance_km(u, v)?;
        if distance_km > params.dist_threshold_km {
            continue;
        }
        let ns = network_score(graph, u, v, params)?;
        out.push(Recommendation {
            candidate: v.clone(),
            score: ns.score,
            phase: Phase::Network,
            explanation: Explanation {
                similarity: similarity(graph, u, v)?,
                distance_km,
                structure: Some(ns.structure),
                affinity: Some(ns.affinity),
                components: ns.components.iter().map(|c| (c.vertices, c.edges)).collect(),
            },
        });
    }
    out.sort_by(rank_order);
    out.truncate(params.top_n);
    Ok(out)
}

/// Ranked recommendations for `u` at time `now`, in whichever phase the
/// region is in.
pub fn recommend(
    graph: &SocialGraph,
    u: &UserId,
    params: &RecommendParams,
    now: Timestamp,
) -> Result<Vec<Recommendation>, RecommendError> {
    params.validate()?;
    match select_phase(graph, u, params, now)? {
        Phase::Similarity => similarity_candidates(graph, u, params),
        Phase::Network => network_candidates(graph, u, params),
    }
}
