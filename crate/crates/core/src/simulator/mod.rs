//! Agent-based A/B harness: a control cohort with ordinary social dynamics
//! and a treatment cohort that additionally receives recommendations and
//! offline tasks.
//!
//! The two cohorts are mirrored: agent `j` has the same traits, location and
//! random streams in both, and every random decision is drawn from a stream
//! keyed by (seed, purpose, agent, week). A draw is consumed whether or not
//! it ends up mattering, so runs that differ only in the mechanism stay on
//! common random numbers.

mod config;
mod loneliness;
mod trial;

use std::collections::BTreeSet;
use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::emotion::EmotionError;
use crate::recommend::{recommend, RecommendError};
use crate::rewards::{RewardError, RewardLedger};
use crate::socialgraph::{Catalog, GeoPoint, GraphError, SocialGraph, TaskId, UserId, UserProfile};

pub use config::SimConfig;
pub use loneliness::{loneliness_proxy, LonelinessBand, LonelinessParams};
pub use trial::{
    run_emotion_trial, satisfaction_level, EmpathyReference, TrialConfig, TrialPolicy,
    TrialResult, SATISFACTION_LEVELS,
};

#[derive(Debug, Error)]
pub enum SimError {
    #[error("invalid simulation config: {0}")]
    InvalidConfig(String),
    #[error("{path}: {source}")]
    Io {
        path: String,
        source: std::io::Error,
    },
    #[error("{path}: {message}")]
    Parse { path: String, message: String },
    #[error("trial has no interactions")]
    EmptyTrial,
    #[error(transparent)]
    Graph(#[from] GraphError),
    #[error(transparent)]
    Recommend(#[from] RecommendError),
    #[error(transparent)]
    Reward(#[from] RewardError),
    #[error(transparent)]
    Emotion(#[from] EmotionError),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Group {
    Control,
    Treatment,
}

impl Group {
    pub fn as_str(self) -> &'static str {
        match self {
            Group::Control => "control",
            Group::Treatment => "treatment",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct AgentTraits {
    /// Base propensity to socialize, in [0, 1].
    pub sociability: f64,
    /// Base probability of taking up an issued task, in [0, 1].
    pub responsiveness: f64,
    /// Hours spent socializing in the latest week.
    pub weekly_social_time: f64,
    /// Users met at least once.
    pub circle: BTreeSet<UserId>,
}

/// Per-cohort outcome series. Every series has one entry per simulated week.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct GroupMetrics {
    pub group: Group,
    pub agents: usize,
    pub initial_social_time: f64,
    pub initial_circle_size: f64,
    pub social_time: Vec<f64>,
    pub circle_size: Vec<f64>,
    pub tasks_completed: Vec<u64>,
    /// End-of-run counts per loneliness band, low to high.
    pub loneliness: [usize; 4],
}

impl GroupMetrics {
    pub fn final_circle_size(&self) -> f64 {
        self.circle_size.last().copied().unwrap_or(self.initial_circle_size)
    }

    pub fn final_social_time(&self) -> f64 {
        self.social_time.last().copied().unwrap_or(self.initial_social_time)
    }

    pub fn mean_social_time(&self) -> f64 {
        if self.social_time.is_empty() {
            return self.initial_social_time;
        }
        self.social_time.iter().sum::<f64>() / self.social_time.len() as f64
    }

    pub fn mean_circle_size(&self) -> f64 {
        if self.circle_size.is_empty() {
            return self.initial_circle_size;
        }
        self.circle_size.iter().sum::<f64>() / self.circle_size.len() as f64
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SimMetrics {
    pub weeks: usize,
    pub seed: u64,
    pub control: GroupMetrics,
    pub treatment: GroupMetrics,
}

impl SimMetrics {
    /// One `key=value` record per group and week.
    pub fn to_lines(&self) -> String {
        let mut out = String::new();
        for g in [&self.control, &self.treatment] {
            for w in 0..self.weeks {
                out.push_str(&format!(
                    "group={} week={} social_time={} circle_size={} tasks={}\n",
                    g.group.as_str(),
                    w + 1,
                    g.social_time[w],
                    g.circle_size[w],
                    g.tasks_completed[w]
                ));
            }
        }
        out
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::from("group,week,social_time,circle_size,tasks\n");
        for g in [&self.control, &self.treatment] {
            out.push_str(&format!(
                "{},0,{},{},0\n",
                g.group.as_str(),
                g.initial_social_time,
                g.initial_circle_size
            ));
            for w in 0..self.weeks {
                out.push_str(&format!(
                    "{},{},{},{},{}\n",
                    g.group.as_str(),
                    w + 1,
                    g.social_time[w],
                    g.circle_size[w],
                    g.tasks_completed[w]
                ));
            }
        }
        out
    }

    pub fn summary_table(&self) -> String {
        let mut out = format!(
            "{:<10} {:>7} {:>12} {:>12} {:>7} {:>22}\n",
            "group", "agents", "social h/wk", "circle", "tasks", "lonely low/mod/mh/high"
        );
        for g in [&self.control, &self.treatment] {
            let l = g.loneliness;
            out.push_str(&format!(
                "{:<10} {:>7} {:>12.3} {:>12.3} {:>7} {:>22}\n",
                g.group.as_str(),
                g.agents,
                g.final_social_time(),
                g.final_circle_size(),
                g.tasks_completed.iter().sum::<u64>(),
                format!("{}/{}/{}/{}", l[0], l[1], l[2], l[3])
            ));
        }
        out
    }
}

const TRAITS: u64 = 1;
const INITIAL: u64 = 2;
const ORGANIC: u64 = 3;
const TASKS: u64 = 4;

fn stream(seed: u64, purpose: u64, agent: usize, week: usize) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ purpose.wrapping_mul(0x9E37_79B9_7F4A_7C15));
    rng.set_stream(((agent as u64) << 32) | week as u64);
    rng
}

fn sigmoid(x: f64) -> f64 {
    1.0 / (1.0 + (-x).exp())
}

struct Cohort {
    group: Group,
    graph: SocialGraph,
    ids: Vec<UserId>,
    traits: Vec<AgentTraits>,
    ledger: RewardLedger,
    metrics: GroupMetrics,
    next_task: u64,
}

impl Cohort {
    fn new(group: Group, size: usize, config: &SimConfig) -> Result<Self, SimError> {
        let catalog = Catalog {
            attributes: config.attribute_dims,
            preferences: config.preference_dims,
        };
        let mut graph = SocialGraph::new(catalog, config.reward.params())?;
        let mut ids = Vec::with_capacity(size);
        let mut traits = Vec::with_capacity(size);
        let mut ledger = RewardLedger::new();
        let km_per_deg_lat = 111.32;
        let km_per_deg_lon = km_per_deg_lat * config.center_lat.to_radians().cos();
        for j in 0..size {
            let mut rng = stream(config.seed, TRAITS, j, 0);
            let sociability: f64 = rng.random();
            let responsiveness: f64 = rng.random();
            let dx = (rng.random::<f64>() - 0.5) * config.area_km;
            let dy = (rng.random::<f64>() - 0.5) * config.area_km;
            let location = GeoPoint::new(
                config.center_lat + dy / km_per_deg_lat,
                config.center_lon + dx / km_per_deg_lon,
            );
            let attributes: Vec<f64> = (0..config.attribute_dims).map(|_| rng.random()).collect();
            let preferences: Vec<f64> = (0..config.preference_dims).map(|_| rng.random()).collect();
            let id = graph.add_user(
                UserProfile::new(format!("a{j:06}"), location).with_features(attributes, preferences),
            )?;
            ledger.register(id.clone());
            ids.push(id);
            traits.push(AgentTraits {
                sociability,
                responsiveness,
                weekly_social_time: config.base_hours * sociability,
                circle: BTreeSet::new(),
            });
        }
        // one prior acquaintance with probability equal to sociability
        for j in 0..size {
            let mut rng = stream(config.seed, INITIAL, j, 0);
            let (u1, u2): (f64, f64) = (rng.random(), rng.random());
            if size > 1 && u1 < traits[j].sociability {
                let k = pick_other(j, size, u2);
                graph.record_meetup(&ids[j], &ids[k], 0)?;
            }
        }
        let mut cohort = Self {
            group,
            graph,
            ids,
            traits,
            ledger,
            metrics: GroupMetrics {
                group,
                agents: size,
                initial_social_time: 0.0,
                initial_circle_size: 0.0,
                social_time: Vec::new(),
                circle_size: Vec::new(),
                tasks_completed: Vec::new(),
                loneliness: [0; 4],
            },
            next_task: 0,
        };
        cohort.refresh_circles()?;
        cohort.metrics.initial_social_time = cohort.mean_time();
        cohort.metrics.initial_circle_size = cohort.mean_circle();
        Ok(cohort)
    }

    fn refresh_circles(&mut self) -> Result<(), SimError> {
        for (j, id) in self.ids.iter().enumerate() {
            let circle = self
                .graph
                .incident_edges(id)?
                .filter(|e| e.tasks >= 1)
                .filter_map(|e| e.other(id).cloned())
                .collect();
            self.traits[j].circle = circle;
        }
        Ok(())
    }

    fn mean_time(&self) -> f64 {
        mean(self.traits.iter().map(|t| t.weekly_social_time))
    }

    fn mean_circle(&self) -> f64 {
        mean(self.traits.iter().map(|t| t.circle.len() as f64))
    }

    fn week(&mut self, week: usize, config: &SimConfig) -> Result<(), SimError> {
        let n = self.ids.len();
        let now = week as u64;
        let mut meetups = vec![0u32; n];

        for j in 0..n {
            let mut rng = stream(config.seed, ORGANIC, j, week);
            for _ in 0..config.organic_slots {
                let (go, reconnect, pick): (f64, f64, f64) =
                    (rng.random(), rng.random(), rng.random());
                if n < 2 || go >= self.traits[j].sociability * config.organic_rate {
                    continue;
                }
                let friends = self.graph.neighbors(&self.ids[j])?;
                let k = if reconnect < config.reconnect_prob && !friends.is_empty() {
                    let f = friends.iter().nth(index(pick, friends.len())).unwrap();
                    self.ids.binary_search(f).expect("friends are cohort members")
                } else {
                    pick_other(j, n, pick)
                };
                self.graph.record_meetup(&self.ids[j], &self.ids[k], now)?;
                meetups[j] += 1;
                meetups[k] += 1;
            }
        }

        let mut completed = 0u64;
        if self.group == Group::Treatment && config.tasks_per_week > 0 {
            let params = *self.graph.params();
            for j in 0..n {
                let mut rng = stream(config.seed, TASKS, j, week);
                let recs = recommend(&self.graph, &self.ids[j], &config.recommend, now)?;
                let mut friends: Vec<(u64, UserId)> = self
                    .graph
                    .incident_edges(&self.ids[j])?
                    .filter_map(|e| e.other(&self.ids[j]).map(|o| (e.tasks, o.clone())))
                    .collect();
                friends.sort();
                for slot in 0..config.tasks_per_week {
                    let (du, dv): (f64, f64) = (rng.random(), rng.random());
                    let partner = if slot < recs.len() {
                        recs[slot].candidate.clone()
                    } else if !friends.is_empty() {
                        friends[(slot - recs.len()) % friends.len()].1.clone()
                    } else {
                        continue;
                    };
                    let k = self.ids.binary_search(&partner).expect("candidates are cohort members");
                    let gain = match self.graph.edge(&self.ids[j], &partner) {
                        Some(e) => params.alpha * params.marginal_weight(e.tasks),
                        None => params.alpha * params.weight(1),
                    };
                    let accept = |r: f64, d: f64| d < r * sigmoid(gain);
                    if !(accept(self.traits[j].responsiveness, du)
                        && accept(self.traits[k].responsiveness, dv))
                    {
                        continue;
                    }
                    let id = TaskId::from(format!("t{}", self.next_task));
                    self.next_task += 1;
                    self.graph
                        .issue_task(id.clone(), &self.ids[j], &partner, now, Some(now), None)?;
                    let done = self.graph.complete_task(&id, now)?;
                    self.ledger.on_task_completed(&done, &config.reward)?;
                    meetups[j] += 1;
                    meetups[k] += 1;
                    completed += 1;
                }
            }
        }

        for (t, m) in self.traits.iter_mut().zip(&meetups) {
            t.weekly_social_time = config.base_hours * t.sociability + config.hours_per_meetup * *m as f64;
        }
        self.refresh_circles()?;
        let (time, circle) = (self.mean_time(), self.mean_circle());
        self.metrics.social_time.push(time);
        self.metrics.circle_size.push(circle);
        self.metrics.tasks_completed.push(completed);
        Ok(())
    }

    fn finish(mut self, config: &SimConfig) -> GroupMetrics {
        for t in &self.traits {
            let band = loneliness_proxy(t, &config.loneliness);
            self.metrics.loneliness[band as usize] += 1;
        }
        self.metrics
    }
}

fn mean(values: impl Iterator<Item = f64>) -> f64 {
    let (mut s, mut n) = (0.0, 0usize);
    for v in values {
        s += v;
        n += 1;
    }
    if n == 0 {
        0.0
    } else {
        s / n as f64
    }
}

fn index(u: f64, len: usize) -> usize {
    ((u * len as f64) as usize).min(len - 1)
}

/// A uniformly chosen agent other than `j`.
fn pick_other(j: usize, n: usize, u: f64) -> usize {
    let k = index(u, n - 1);
    if k >= j {
        k + 1
    } else {
        k
    }
}

/// Runs both cohorts for `config.weeks` weeks.
pub fn run(config: &SimConfig) -> Result<SimMetrics, SimError> {
    config.validate()?;
    let mut control = Cohort::new(Group::Control, config.control, config)?;
    let mut treatment = Cohort::new(Group::Treatment, config.treatment, config)?;
    for week in 1..=config.weeks {
        control.week(week, config)?;
        treatment.week(week, config)?;
    }
    Ok(SimMetrics {
        weeks: config.weeks,
        seed: config.seed,
        control: control.finish(config),
        treatment: treatment.finish(config),
    })
}

/// Independent replicates, one thread per seed.
pub fn run_replicates(config: &SimConfig, seeds: &[u64]) -> Vec<Result<SimMetrics, SimError>> {
    std::thread::scope(|s| {
        let handles: Vec<_> = seeds
            .iter()
            .map(|&seed| {
                let cfg = SimConfig {
                    seed,
                    ..config.clone()
                };
                s.spawn(move || run(&cfg))
            })
            .collect();
        handles
            .into_iter()
            .map(|h| h.join().expect("replicate thread panicked"))
            .collect()
    })
}

/// Loads a config and runs it.
pub fn run_file(path: impl AsRef<Path>) -> Result<SimMetrics, SimError> {
    run(&SimConfig::load(path)?)
}
