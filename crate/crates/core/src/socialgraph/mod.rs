//! Users, stores, offline tasks and the weighted friendship graph.
//!
//! The graph is simple and undirected. An edge between two users carries the
//! number of offline tasks they finished together and a cached weight derived
//! from that count through [`RewardParams::weight`]. Edges are created lazily
//! the first time a task between a pair is completed.

mod geo;
mod io;
mod store;

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::rewards::{RewardError, RewardParams};

pub use geo::{haversine_km, GeoPoint, EARTH_RADIUS_KM};
pub use io::{read_graph, write_graph, ParseError};
pub use store::GraphStore;

/// Simulation or wall-clock time in whole seconds (or weeks, for the simulator).
pub type Timestamp = u64;

macro_rules! id_type {
    ($(#[$meta:meta])* $name:ident) => {
        $(#[$meta])*
        #[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
        #[serde(transparent)]
        pub struct $name(String);

        impl $name {
            pub fn as_str(&self) -> &str {
                &self.0
            }

            /// Ids end up as bare tokens in the graph file, so they must be
            /// non-empty and free of whitespace and the record delimiters.
            pub fn is_valid(&self) -> bool {
                !self.0.is_empty()
                    && !self
                        .0
                        .chars()
                        .any(|c| c.is_whitespace() || matches!(c, '=' | ',' | ';' | ':' | '#'))
            }
        }

        impl From<&str> for $name {
            fn from(s: &str) -> Self {
                Self(s.to_owned())
            }
        }

        impl From<String> for $name {
            fn from(s: String) -> Self {
                Self(s)
            }
        }

        impl fmt::Display for $name {
            fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
                f.write_str(&self.0)
            }
        }
    };
}

id_type!(UserId);
id_type!(StoreId);
id_type!(TaskId);
id_type!(
    /// Identifier of a virtual pet prop (ration, toy, ...).
    PropId
);

#[derive(Debug, Error, PartialEq)]
pub enum GraphError {
    #[error("unknown user `{0}`")]
    UnknownUser(UserId),
    #[error("user `{0}` already exists")]
    DuplicateUser(UserId),
    #[error("unknown store `{0}`")]
    UnknownStore(StoreId),
    #[error("store `{0}` already exists")]
    DuplicateStore(StoreId),
    #[error("unknown task `{0}`")]
    UnknownTask(TaskId),
    #[error("task `{0}` already exists")]
    DuplicateTask(TaskId),
    #[error("self-edge on `{0}` rejected")]
    SelfEdge(UserId),
    #[error("edge {0} -- {1} already exists")]
    DuplicateEdge(UserId, UserId),
    #[error("task `{0}` was already completed")]
    AlreadyCompleted(TaskId),
    #[error("task `{0}` has expired")]
    Expired(TaskId),
    #[error("invalid id `{0}`")]
    InvalidId(String),
    #[error("{what} has length {got}, catalog expects {expected}")]
    DimensionMismatch {
        what: &'static str,
        expected: usize,
        got: usize,
    },
    #[error("invalid profile: {0}")]
    InvalidProfile(String),
    #[error("invalid store: {0}")]
    InvalidStore(String),
    #[error(transparent)]
    Params(#[from] RewardError),
}

/// Platform-wide feature layout shared by every profile.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Catalog {
    pub attributes: usize,
    pub preferences: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct UserProfile {
    pub id: UserId,
    pub location: GeoPoint,
    /// Basic-information features, each in `[0, 1]`.
    pub attributes: Vec<f64>,
    /// Item-preference scores over the shared catalog, each in `[0, 1]`.
    pub preferences: Vec<f64>,
    /// Number of collective (platform-organized) activities joined.
    pub activity_count: u64,
}

impl UserProfile {
    pub fn new(id: impl Into<UserId>, location: GeoPoint) -> Self {
        Self {
            id: id.into(),
            location,
            attributes: Vec::new(),
            preferences: Vec::new(),
            activity_count: 0,
        }
    }

    pub fn with_features(mut self, attributes: Vec<f64>, preferences: Vec<f64>) -> Self {
        self.attributes = attributes;
        self.preferences = preferences;
        self
    }

    fn validate(&self, catalog: &Catalog) -> Result<(), GraphError> {
        if !self.id.is_valid() {
            return Err(GraphError::InvalidId(self.id.0.clone()));
        }
        if self.attributes.len() != catalog.attributes {
            return Err(GraphError::DimensionMismatch {
                what: "attributes",
                expected: catalog.attributes,
                got: self.attributes.len(),
            });
        }
        if self.preferences.len() != catalog.preferences {
            return Err(GraphError::DimensionMismatch {
                what: "preferences",
                expected: catalog.preferences,
                got: self.preferences.len(),
            });
        }
        if !self.location.is_valid() {
            return Err(GraphError::InvalidProfile(format!(
                "location {:?} out of range",
                self.location
            )));
        }
        let in_unit = |x: &f64| x.is_finite() && (0.0..=1.0).contains(x);
        if !self.attributes.iter().all(in_unit) || !self.preferences.iter().all(in_unit) {
            return Err(GraphError::InvalidProfile(format!(
                "features of `{}` must lie in [0, 1]",
                self.id
            )));
        }
        Ok(())
    }
}

/// Undirected friendship edge. Endpoints are stored in ascending order.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SocialEdge {
    pub a: UserId,
    pub b: UserId,
    /// Offline tasks finished together.
    pub tasks: u64,
    /// Cached `RewardParams::weight(tasks)`.
    pub weight: f64,
    pub created_at: Timestamp,
}

impl SocialEdge {
    pub fn other(&self, u: &UserId) -> Option<&UserId> {
        if &self.a == u {
            Some(&self.b)
        } else if &self.b == u {
            Some(&self.a)
        } else {
            None
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EventListing {
    pub id: String,
    pub capacity: u32,
    pub start: Timestamp,
    pub end: Timestamp,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Store {
    pub id: StoreId,
    pub location: GeoPoint,
    pub events: Vec<EventListing>,
    pub venues: Vec<String>,
}

impl Store {
    fn validate(&self) -> Result<(), GraphError> {
        if !self.id.is_valid() {
            return Err(GraphError::InvalidId(self.id.0.clone()));
        }
        if !self.location.is_valid() {
            return Err(GraphError::InvalidStore(format!("store `{}` location", self.id)));
        }
        let token_ok = |s: &str| {
            !s.is_empty()
                && !s
                    .chars()
                    .any(|c| c.is_whitespace() || matches!(c, '=' | ',' | ';' | ':' | '#'))
        };
        for ev in &self.events {
            if ev.capacity == 0 {
                return Err(GraphError::InvalidStore(format!(
                    "event `{}` has zero capacity",
                    ev.id
                )));
            }
            if ev.end < ev.start {
                return Err(GraphError::InvalidStore(format!(
                    "event `{}` ends before it starts",
                    ev.id
                )));
            }
            if !token_ok(&ev.id) {
                return Err(GraphError::InvalidId(ev.id.clone()));
            }
        }
        if let Some(v) = self.venues.iter().find(|v| !token_ok(v)) {
            return Err(GraphError::InvalidId(v.clone()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TaskStatus {
    Issued,
    Completed,
    Expired,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OfflineTask {
    pub id: TaskId,
    pub a: UserId,
    pub b: UserId,
    pub status: TaskStatus,
    pub issued_at: Timestamp,
    pub completed_at: Option<Timestamp>,
    /// Completion after this instant fails with [`GraphError::Expired`].
    pub deadline: Option<Timestamp>,
    /// Prop granted to both participants on completion.
    pub reward_prop: Option<PropId>,
}

/// Outcome of a completed task, handed on to the reward ledger.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TaskCompletion {
    pub task: OfflineTask,
    pub edge: SocialEdge,
    pub edge_created: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SocialGraph {
    catalog: Catalog,
    params: RewardParams,
    users: BTreeMap<UserId, UserProfile>,
    adjacency: BTreeMap<UserId, BTreeSet<UserId>>,
    edges: BTreeMap<(UserId, UserId), SocialEdge>,
    stores: BTreeMap<StoreId, Store>,
    tasks: BTreeMap<TaskId, OfflineTask>,
}

fn edge_key(u: &UserId, v: &UserId) -> (UserId, UserId) {
    if u <= v {
        (u.clone(), v.clone())
    } else {
        (v.clone(), u.clone())
    }
}

impl SocialGraph {
    pub fn new(catalog: Catalog, params: RewardParams) -> Result<Self, GraphError> {
        params.validate()?;
        Ok(Self {
            catalog,
            params,
            users: BTreeMap::new(),
            adjacency: BTreeMap::new(),
            edges: BTreeMap::new(),
            stores: BTreeMap::new(),
            tasks: BTreeMap::new(),
        })
    }

    pub fn catalog(&self) -> Catalog {
        self.catalog
    }

    pub fn params(&self) -> &RewardParams {
        &self.params
    }

    /// Replaces the reward parameters and refreshes every cached edge weight.
    pub fn set_params(&mut self, params: RewardParams) -> Result<(), GraphError> {
        params.validate()?;
        self.params = params;
        for edge in self.edges.values_mut() {
            edge.weight = self.params.weight(edge.tasks);
        }
        Ok(())
    }

    pub fn add_user(&mut self, profile: UserProfile) -> Result<UserId, GraphError> {
        profile.validate(&self.catalog)?;
        if self.users.contains_key(&profile.id) {
            return Err(GraphError::DuplicateUser(profile.id));
        }
        let id = profile.id.clone();
        self.adjacency.insert(id.clone(), BTreeSet::new());
        self.users.insert(id.clone(), profile);
        Ok(id)
    }

    pub fn user(&self, u: &UserId) -> Result<&UserProfile, GraphError> {
        self.users
            .get(u)
            .ok_or_else(|| GraphError::UnknownUser(u.clone()))
    }

    pub fn contains_user(&self, u: &UserId) -> bool {
        self.users.contains_key(u)
    }

    pub fn users(&self) -> impl Iterator<Item = &UserProfile> {
        self.users.values()
    }

    pub fn user_ids(&self) -> impl Iterator<Item = &UserId> {
        self.users.keys()
    }

    pub fn user_count(&self) -> usize {
        self.users.len()
    }

    /// Counts one more collective activity for `u`.
    pub fn record_activity(&mut self, u: &UserId) -> Result<u64, GraphError> {
        let profile = self
            .users
            .get_mut(u)
            .ok_or_else(|| GraphError::UnknownUser(u.clone()))?;
        profile.activity_count += 1;
        Ok(profile.activity_count)
    }

    /// Adds an edge with zero finished tasks.
    pub fn add_edge(
        &mut self,
        u: &UserId,
        v: &UserId,
        now: Timestamp,
    ) -> Result<&SocialEdge, GraphError> {
        self.check_pair(u, v)?;
        let key = edge_key(u, v);
        if self.edges.contains_key(&key) {
            return Err(GraphError::DuplicateEdge(key.0, key.1));
        }
        Ok(self.insert_edge(key, 0, now))
    }

    fn check_pair(&self, u: &UserId, v: &UserId) -> Result<(), GraphError> {
        self.user(u)?;
        self.user(v)?;
        if u == v {
            return Err(GraphError::SelfEdge(u.clone()));
        }
        Ok(())
    }

    fn insert_edge(&mut self, key: (UserId, UserId), tasks: u64, now: Timestamp) -> &SocialEdge {
        self.adjacency
            .get_mut(&key.0)
            .expect("endpoint checked")
            .insert(key.1.clone());
        self.adjacency
            .get_mut(&key.1)
            .expect("endpoint checked")
            .insert(key.0.clone());
        let edge = SocialEdge {
            a: key.0.clone(),
            b: key.1.clone(),
            tasks,
            weight: self.params.weight(tasks),
            created_at: now,
        };
        self.edges.entry(key).or_insert(edge)
    }

    /// Increments the finished-task count of the pair, creating the edge at
    /// one task if it does not exist yet. Returns the updated edge and
    /// whether it was created.
    fn bump_pair(
        &mut self,
        u: &UserId,
        v: &UserId,
        now: Timestamp,
    ) -> Result<(SocialEdge, bool), GraphError> {
        self.check_pair(u, v)?;
        let key = edge_key(u, v);
        if let Some(edge) = self.edges.get_mut(&key) {
            edge.tasks += 1;
            edge.weight = self.params.weight(edge.tasks);
            return Ok((edge.clone(), false));
        }
        Ok((self.insert_edge(key, 1, now).clone(), true))
    }

    /// A self-initiated offline meetup. Counts as a finished task on the pair.
    pub fn record_meetup(
        &mut self,
        u: &UserId,
        v: &UserId,
        now: Timestamp,
    ) -> Result<(SocialEdge, bool), GraphError> {
        self.bump_pair(u, v, now)
    }

    pub fn neighbors(&self, u: &UserId) -> Result<&BTreeSet<UserId>, GraphError> {
        self.adjacency
            .get(u)
            .ok_or_else(|| GraphError::UnknownUser(u.clone()))
    }

    pub fn degree(&self, u: &UserId) -> Result<usize, GraphError> {
        self.neighbors(u).map(BTreeSet::len)
    }

    pub fn are_adjacent(&self, u: &UserId, v: &UserId) -> bool {
        self.adjacency.get(u).is_some_and(|n| n.contains(v))
    }

    pub fn edge(&self, u: &UserId, v: &UserId) -> Option<&SocialEdge> {
        self.edges.get(&edge_key(u, v))
    }

    pub fn edges(&self) -> impl Iterator<Item = &SocialEdge> {
        self.edges.values()
    }

    pub fn edge_count(&self) -> usize {
        self.edges.len()
    }

    pub fn incident_edges<'a>(
        &'a self,
        u: &'a UserId,
    ) -> Result<impl Iterator<Item = &'a SocialEdge> + 'a, GraphError> {
        let neighbors = self.neighbors(u)?;
        Ok(neighbors
            .iter()
            .filter_map(move |v| self.edges.get(&edge_key(u, v))))
    }

    pub fn distance_km(&self, u: &UserId, v: &UserId) -> Result<f64, GraphError> {
        Ok(haversine_km(self.user(u)?.location, self.user(v)?.location))
    }

    pub fn add_store(&mut self, store: Store) -> Result<&Store, GraphError> {
        store.validate()?;
        if self.stores.contains_key(&store.id) {
            return Err(GraphError::DuplicateStore(store.id));
        }
        let id = store.id.clone();
        Ok(self.stores.entry(id).or_insert(store))
    }

    pub fn store(&self, id: &StoreId) -> Result<&Store, GraphError> {
        self.stores
            .get(id)
            .ok_or_else(|| GraphError::UnknownStore(id.clone()))
    }

    pub fn stores(&self) -> impl Iterator<Item = &Store> {
        self.stores.values()
    }

    /// Publishes an offline task for a pair of users.
    pub fn issue_task(
        &mut self,
        id: TaskId,
        u: &UserId,
        v: &UserId,
        now: Timestamp,
        deadline: Option<Timestamp>,
        reward_prop: Option<PropId>,
    ) -> Result<&OfflineTask, GraphError> {
        if !id.is_valid() {
            return Err(GraphError::InvalidId(id.0));
        }
        if let Some(p) = &reward_prop {
            if !p.is_valid() {
                return Err(GraphError::InvalidId(p.0.clone()));
            }
        }
        self.check_pair(u, v)?;
        if self.tasks.contains_key(&id) {
            return Err(GraphError::DuplicateTask(id));
        }
        let task = OfflineTask {
            id: id.clone(),
            a: u.clone(),
            b: v.clone(),
            status: TaskStatus::Issued,
            issued_at: now,
            completed_at: None,
            deadline,
            reward_prop,
        };
        Ok(self.tasks.entry(id).or_insert(task))
    }

    pub fn task(&self, id: &TaskId) -> Result<&OfflineTask, GraphError> {
        self.tasks
            .get(id)
            .ok_or_else(|| GraphError::UnknownTask(id.clone()))
    }

    pub fn tasks(&self) -> impl Iterator<Item = &OfflineTask> {
        self.tasks.values()
    }

    /// Marks the task completed and bumps the pair's edge.
    pub fn complete_task(
        &mut self,
        id: &TaskId,
        now: Timestamp,
    ) -> Result<TaskCompletion, GraphError> {
        let task = self
            .tasks
            .get_mut(id)
            .ok_or_else(|| GraphError::UnknownTask(id.clone()))?;
        match task.status {
            TaskStatus::Completed => return Err(GraphError::AlreadyCompleted(id.clone())),
            TaskStatus::Expired => return Err(GraphError::Expired(id.clone())),
            TaskStatus::Issued => {}
        }
        if task.deadline.is_some_and(|d| now > d) {
            task.status = TaskStatus::Expired;
            return Err(GraphError::Expired(id.clone()));
        }
        task.status = TaskStatus::Completed;
        task.completed_at = Some(now.max(task.issued_at));
        let task = task.clone();
        let (edge, edge_created) = self.bump_pair(&task.a, &task.b, now)?;
        Ok(TaskCompletion {
            task,
            edge,
            edge_created,
        })
    }

    /// Expires every issued task whose deadline lies before `now`.
    pub fn expire_tasks(&mut self, now: Timestamp) -> usize {
        let mut n = 0;
        for task in self.tasks.values_mut() {
            if task.status == TaskStatus::Issued && task.deadline.is_some_and(|d| now > d) {
                task.status = TaskStatus::Expired;
                n += 1;
            }
        }
        n
    }

    // Raw insertion used by the loader; bypasses lifecycle checks but keeps
    // the structural invariants.
    pub(crate) fn insert_loaded_edge(
        &mut self,
        u: &UserId,
        v: &UserId,
        tasks: u64,
        created_at: Timestamp,
    ) -> Result<(), GraphError> {
        self.check_pair(u, v)?;
        let key = edge_key(u, v);
        if self.edges.contains_key(&key) {
            return Err(GraphError::DuplicateEdge(key.0, key.1));
        }
        self.insert_edge(key, tasks, created_at);
        Ok(())
    }

    pub(crate) fn insert_loaded_task(&mut self, task: OfflineTask) -> Result<(), GraphError> {
        self.check_pair(&task.a, &task.b)?;
        if !task.id.is_valid() {
            return Err(GraphError::InvalidId(task.id.0));
        }
        if self.tasks.contains_key(&task.id) {
            return Err(GraphError::DuplicateTask(task.id));
        }
        if let (TaskStatus::Completed, Some(c)) = (task.status, task.completed_at) {
            if c < task.issued_at {
                return Err(GraphError::InvalidProfile(format!(
                    "task `{}` completed before it was issued",
                    task.id
                )));
            }
        }
        self.tasks.insert(task.id.clone(), task);
        Ok(())
    }
}
