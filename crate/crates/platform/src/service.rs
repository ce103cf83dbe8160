//! HTTP and websocket front end.
//!
//! ```text
//! GET  /pet/{id}/state             latest pet snapshot
//! POST /pet/{id}/feed              {prop_id, user?, request_id?}
//! POST /pet/{id}/environment       {readings, weights, threshold, request_id?}
//! GET  /pet/{id}/stream            websocket, one `tick` message per tick
//! GET  /users/{id}/recommendations ?now=<t>
//! GET  /users/{id}/reward
//! POST /tasks                      {id, a, b, deadline?, prop?}
//! POST /tasks/{id}/complete        409 once completed, 410 once expired
//! GET  /metrics
//! ```
//!
//! Bodies use the encoding described in [`crate::wire`].

use std::collections::{BTreeMap, HashMap};
use std::io::Write as _;
use std::net::SocketAddr;
use std::path::{Path, PathBuf};
use std::sync::atomic::{AtomicU64, Ordering};
use std::sync::{Arc, Mutex, PoisonError};
use std::time::Duration;

use axum::body::Bytes;
use axum::extract::ws::{Message, WebSocket, WebSocketUpgrade};
use axum::extract::{Path as UrlPath, Query, State};
use axum::http::StatusCode;
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post};
use axum::{Json, Router};
use futures_util::{SinkExt, StreamExt};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};
use serde_json::Value;
use thiserror::Error;
use tokio::sync::{broadcast, watch};
use tokio::task::JoinHandle;
use tomtalk_core::emotion::{EmotionEngine, EngineSnapshot, PropItem, SensorFrame, TickRecord};
use tomtalk_core::recommend::{recommend, select_phase, Recommendation, RecommendError};
use tomtalk_core::rewards::{edge_weight_sum, total_reward, RewardError, RewardLedger, UserRewards};
use tomtalk_core::socialgraph::{
    write_graph, GraphError, GraphStore, PropId, SocialGraph, TaskId, UserId,
};

use crate::config::{ConfigError, PlatformConfig};
use crate::pets::PetHandle;
use crate::wire::{
    check_version, envelope, ClientMessage, EnvironmentRequest, FeedRequest, IssueTaskRequest,
};

/// Answers kept for request-id deduplication before the oldest are dropped.
const REPLY_CACHE: usize = 4096;

#[derive(Debug, Error)]
pub enum ServeError {
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error("cannot listen on {addr}: {source}")]
    Bind {
        addr: String,
        source: std::io::Error,
    },
    #[error("cannot write {}: {source}", path.display())]
    Persist {
        path: PathBuf,
        source: std::io::Error,
    },
    #[error("server failed: {0}")]
    Server(std::io::Error),
}

#[derive(Debug)]
pub struct ApiError {
    status: StatusCode,
    message: String,
}

impl ApiError {
    fn new(status: StatusCode, message: impl Into<String>) -> Self {
        Self {
            status,
            message: message.into(),
        }
    }

    fn bad_request(message: impl Into<String>) -> Self {
        Self::new(StatusCode::BAD_REQUEST, message)
    }

    fn not_found(message: impl Into<String>) -> Self {
        Self::new(StatusCode::NOT_FOUND, message)
    }

    fn conflict(message: impl Into<String>) -> Self {
        Self::new(StatusCode::CONFLICT, message)
    }

    fn stopping() -> Self {
        Self::new(StatusCode::SERVICE_UNAVAILABLE, "service is shutting down")
    }

    fn body(&self) -> Value {
        #[derive(Serialize)]
        struct Body<'a> {
            status: u16,
            message: &'a str,
        }
        envelope(
            "error",
            &Body {
                status: self.status.as_u16(),
                message: &self.message,
            },
        )
    }
}

impl IntoResponse for ApiError {
    fn into_response(self) -> Response {
        (self.status, Json(self.body())).into_response()
    }
}

impl From<GraphError> for ApiError {
    fn from(e: GraphError) -> Self {
        let status = match e {
            GraphError::UnknownUser(_) | GraphError::UnknownStore(_) | GraphError::UnknownTask(_) => {
                StatusCode::NOT_FOUND
            }
            GraphError::AlreadyCompleted(_) | GraphError::DuplicateTask(_) => StatusCode::CONFLICT,
            GraphError::Expired(_) => StatusCode::GONE,
            _ => StatusCode::BAD_REQUEST,
        };
        Self::new(status, e.to_string())
    }
}

impl From<RecommendError> for ApiError {
    fn from(e: RecommendError) -> Self {
        match e {
            RecommendError::UnknownUser(_) => Self::not_found(e.to_string()),
            _ => Self::bad_request(e.to_string()),
        }
    }
}

impl From<RewardError> for ApiError {
    fn from(e: RewardError) -> Self {
        match e {
            RewardError::UnknownUser(_) => Self::not_found(e.to_string()),
            _ => Self::bad_request(e.to_string()),
        }
    }
}

type ApiResult = Result<Json<Value>, ApiError>;

fn parse_body<T: DeserializeOwned>(body: &Bytes) -> Result<T, ApiError> {
    serde_json::from_slice(body).map_err(|e| ApiError::bad_request(format!("malformed body: {e}")))
}

#[derive(Debug, Default)]
pub struct Metrics {
    pub requests: AtomicU64,
    pub errors: AtomicU64,
    pub conflicts: AtomicU64,
    pub feeds: AtomicU64,
    pub environment_frames: AtomicU64,
    pub tasks_issued: AtomicU64,
    pub tasks_completed: AtomicU64,
    pub stream_sessions: AtomicU64,
    pub stream_messages: AtomicU64,
    pub checkpoints: AtomicU64,
}

fn bump(counter: &AtomicU64) {
    counter.fetch_add(1, Ordering::Relaxed);
}

#[derive(Default)]
struct ReplyCache {
    answers: HashMap<String, Value>,
    order: std::collections::VecDeque<String>,
}

impl ReplyCache {
    fn get(&self, key: &str) -> Option<Value> {
        self.answers.get(key).cloned()
    }

    fn put(&mut self, key: String, value: Value) {
        if self.answers.insert(key.clone(), value).is_none() {
            self.order.push_back(key);
        }
        while self.order.len() > REPLY_CACHE {
            if let Some(old) = self.order.pop_front() {
                self.answers.remove(&old);
            }
        }
    }
}

pub struct AppState {
    config: PlatformConfig,
    graph: GraphStore,
    ledger: Mutex<RewardLedger>,
    pets: BTreeMap<String, PetHandle>,
    props: BTreeMap<PropId, PropItem>,
    replies: Mutex<ReplyCache>,
    stop: watch::Receiver<bool>,
    pub metrics: Metrics,
}

fn lock<T>(m: &Mutex<T>) -> std::sync::MutexGuard<'_, T> {
    m.lock().unwrap_or_else(PoisonError::into_inner)
}

impl AppState {
    pub fn config(&self) -> &PlatformConfig {
        &self.config
    }

    pub fn graph(&self) -> Arc<SocialGraph> {
        self.graph.snapshot()
    }

    pub fn ledger(&self) -> RewardLedger {
        lock(&self.ledger).clone()
    }

    fn pet(&self, id: &str) -> Result<&PetHandle, ApiError> {
        self.pets
            .get(id)
            .ok_or_else(|| ApiError::not_found(format!("unknown pet `{id}`")))
    }

    /// Writes the graph (and ledger, if configured) atomically.
    pub fn persist(&self) -> Result<(), ServeError> {
        if let Some(path) = &self.config.graph {
            let graph = self.graph.snapshot();
            write_atomic(path, |out| write_graph(&graph, out))?;
        }
        if let Some(path) = &self.config.ledger {
            let ledger = self.ledger();
            write_atomic(path, |out| {
                serde_json::to_writer_pretty(&mut *out, &ledger)?;
                out.write_all(b"\n")
            })?;
        }
        bump(&self.metrics.checkpoints);
        Ok(())
    }

    async fn feed(&self, pet_id: &str, req: FeedRequest) -> Result<Value, ApiError> {
        check_version(req.v).map_err(ApiError::bad_request)?;
        let pet = self.pet(pet_id)?;
        let key = req.request_id.as_ref().map(|r| format!("feed/{pet_id}/{r}"));
        if let Some(answer) = key.as_deref().and_then(|k| lock(&self.replies).get(k)) {
            return Ok(answer);
        }
        let prop = PropId::from(req.prop_id.as_str());
        if !self.props.contains_key(&prop) {
            return Err(ApiError::not_found(format!("unknown prop `{prop}`")));
        }
        if let Some(user) = &req.user {
            let user = UserId::from(user.as_str());
            let paid = lock(&self.ledger).consume_prop(&user, &prop)?;
            if !paid {
                return Err(ApiError::conflict(format!("`{user}` holds no `{prop}`")));
            }
        }
        let ack = pet
            .feed(prop)
            .await
            .map_err(|_| ApiError::stopping())?
            .map_err(|e| ApiError::bad_request(e.to_string()))?;
        bump(&self.metrics.feeds);
        let answer = envelope("feed_ack", &ack);
        if let Some(k) = key {
            lock(&self.replies).put(k, answer.clone());
        }
        Ok(answer)
    }

    async fn environment(&self, pet_id: &str, req: EnvironmentRequest) -> Result<Value, ApiError> {
        check_version(req.v).map_err(ApiError::bad_request)?;
        let pet = self.pet(pet_id)?;
        let key = req.request_id.as_ref().map(|r| format!("env/{pet_id}/{r}"));
        if let Some(answer) = key.as_deref().and_then(|k| lock(&self.replies).get(k)) {
            return Ok(answer);
        }
        let frame = SensorFrame {
            readings: req.readings,
            weights: req.weights,
            threshold: req.threshold,
        };
        frame
            .validate()
            .map_err(|e| ApiError::bad_request(e.to_string()))?;
        let ack = pet
            .environment(frame)
            .await
            .map_err(|_| ApiError::stopping())?
            .map_err(|e| ApiError::bad_request(e.to_string()))?;
        bump(&self.metrics.environment_frames);
        let answer = envelope("environment_ack", &ack);
        if let Some(k) = key {
            lock(&self.replies).put(k, answer.clone());
        }
        Ok(answer)
    }
}

fn write_atomic(
    path: &Path,
    write: impl FnOnce(&mut std::io::BufWriter<std::fs::File>) -> std::io::Result<()>,
) -> Result<(), ServeError> {
    let err = |source| ServeError::Persist {
        path: path.to_owned(),
        source,
    };
    let mut tmp = path.as_os_str().to_owned();
    tmp.push(".tmp");
    let tmp = PathBuf::from(tmp);
    let file = std::fs::File::create(&tmp).map_err(err)?;
    let mut out = std::io::BufWriter::new(file);
    write(&mut out).map_err(err)?;
    out.into_inner()
        .map_err(|e| err(e.into_error()))?
        .sync_all()
        .map_err(err)?;
    std::fs::rename(&tmp, path).map_err(err)
}

/// Snapshot plus pet id, as sent for `GET /pet/{id}/state`.
#[derive(Serialize)]
struct PetState<'a> {
    pet: &'a str,
    #[serde(flatten)]
    snapshot: &'a EngineSnapshot,
}

#[derive(Serialize)]
struct TickMessage<'a> {
    pet: &'a str,
    #[serde(flatten)]
    record: &'a TickRecord,
}

async fn pet_state(State(app): State<Arc<AppState>>, UrlPath(id): UrlPath<String>) -> ApiResult {
    let snap = app.pet(&id)?.snapshot();
    Ok(Json(envelope(
        "pet_state",
        &PetState {
            pet: &id,
            snapshot: &snap,
        },
    )))
}

async fn pet_feed(
    State(app): State<Arc<AppState>>,
    UrlPath(id): UrlPath<String>,
    body: Bytes,
) -> ApiResult {
    let req = parse_body(&body)?;
    app.feed(&id, req).await.map(Json)
}

async fn pet_environment(
    State(app): State<Arc<AppState>>,
    UrlPath(id): UrlPath<String>,
    body: Bytes,
) -> ApiResult {
    let req = parse_body(&body)?;
    app.environment(&id, req).await.map(Json)
}

#[derive(Debug, Deserialize)]
struct RecommendQuery {
    now: Option<u64>,
}

async fn user_recommendations(
    State(app): State<Arc<AppState>>,
    UrlPath(id): UrlPath<String>,
    Query(q): Query<RecommendQuery>,
) -> ApiResult {
    #[derive(Serialize)]
    struct Body<'a> {
        user: &'a str,
        now: u64,
        phase: &'static str,
        items: Vec<Recommendation>,
    }
    let graph = app.graph.snapshot();
    let user = UserId::from(id.as_str());
    let now = q.now.unwrap_or_else(|| app.config.now());
    let params = app.config.recommend;
    let phase = select_phase(&graph, &user, &params, now)?;
    let items = recommend(&graph, &user, &params, now)?;
    Ok(Json(envelope(
        "recommendations",
        &Body {
            user: &id,
            now,
            phase: phase.as_str(),
            items,
        },
    )))
}

async fn user_reward(State(app): State<Arc<AppState>>, UrlPath(id): UrlPath<String>) -> ApiResult {
    #[derive(Serialize)]
    struct Body<'a> {
        user: &'a str,
        total: f64,
        alpha: f64,
        edge_weight_sum: f64,
        activities: u64,
        friends: usize,
        rewards: UserRewards,
    }
    let graph = app.graph.snapshot();
    let user = UserId::from(id.as_str());
    let params = app.config.reward.params();
    let total = total_reward(&graph, &user, &params)?;
    let rewards = lock(&app.ledger).user(&user).cloned().unwrap_or_default();
    Ok(Json(envelope(
        "reward",
        &Body {
            user: &id,
            total,
            alpha: params.alpha,
            edge_weight_sum: edge_weight_sum(&graph, &user)?,
            activities: graph.user(&user)?.activity_count,
            friends: graph.degree(&user)?,
            rewards,
        },
    )))
}

async fn issue_task(State(app): State<Arc<AppState>>, body: Bytes) -> ApiResult {
    let req: IssueTaskRequest = parse_body(&body)?;
    check_version(req.v).map_err(ApiError::bad_request)?;
    let id = TaskId::from(req.id.as_str());
    let (a, b) = (UserId::from(req.a.as_str()), UserId::from(req.b.as_str()));
    let prop = req.prop.as_deref().map(PropId::from);
    let now = app.config.now();
    let task = app.graph.update(|g| {
        // re-issuing the identical task is a no-op
        if let Ok(t) = g.task(&id) {
            let same = ((t.a == a && t.b == b) || (t.a == b && t.b == a))
                && t.deadline == req.deadline
                && t.reward_prop == prop;
            return if same {
                Ok(t.clone())
            } else {
                Err(GraphError::DuplicateTask(id.clone()))
            };
        }
        g.issue_task(id.clone(), &a, &b, now, req.deadline, prop.clone())
            .cloned()
    })?;
    bump(&app.metrics.tasks_issued);
    Ok(Json(envelope("task", &task)))
}

async fn complete_task(State(app): State<Arc<AppState>>, UrlPath(id): UrlPath<String>) -> ApiResult {
    #[derive(Serialize)]
    struct Body<'a> {
        #[serde(flatten)]
        completion: &'a tomtalk_core::socialgraph::TaskCompletion,
        rewards: Vec<tomtalk_core::rewards::RewardEvent>,
    }
    let task = TaskId::from(id.as_str());
    let now = app.config.now();
    let done = match app.graph.update(|g| g.complete_task(&task, now)) {
        Ok(done) => done,
        Err(e @ GraphError::Expired(_)) => {
            // a failed update is rolled back, so record the expiry separately
            let _ = app
                .graph
                .update(|g| Ok::<_, GraphError>(g.expire_tasks(now)));
            return Err(e.into());
        }
        Err(e) => return Err(e.into()),
    };
    let events = {
        let mut ledger = lock(&app.ledger);
        ledger.register(done.task.a.clone());
        ledger.register(done.task.b.clone());
        ledger.on_task_completed(&done, &app.config.reward)?
    };
    bump(&app.metrics.tasks_completed);
    Ok(Json(envelope(
        "task_completed",
        &Body {
            completion: &done,
            rewards: events,
        },
    )))
}

async fn metrics(State(app): State<Arc<AppState>>) -> Json<Value> {
    #[derive(Serialize)]
    struct Body {
        counters: BTreeMap<&'static str, u64>,
        users: usize,
        edges: usize,
        tasks: BTreeMap<&'static str, usize>,
        pet_ticks: BTreeMap<String, u64>,
    }
    let m = &app.metrics;
    let read = |c: &AtomicU64| c.load(Ordering::Relaxed);
    let counters = BTreeMap::from([
        ("requests", read(&m.requests)),
        ("errors", read(&m.errors)),
        ("conflicts", read(&m.conflicts)),
        ("feeds", read(&m.feeds)),
        ("environment_frames", read(&m.environment_frames)),
        ("tasks_issued", read(&m.tasks_issued)),
        ("tasks_completed", read(&m.tasks_completed)),
        ("stream_sessions", read(&m.stream_sessions)),
        ("stream_messages", read(&m.stream_messages)),
        ("checkpoints", read(&m.checkpoints)),
    ]);
    let graph = app.graph.snapshot();
    let mut tasks = BTreeMap::new();
    for t in graph.tasks() {
        let key = match t.status {
            tomtalk_core::socialgraph::TaskStatus::Issued => "issued",
            tomtalk_core::socialgraph::TaskStatus::Completed => "completed",
            tomtalk_core::socialgraph::TaskStatus::Expired => "expired",
        };
        *tasks.entry(key).or_insert(0) += 1;
    }
    Json(envelope(
        "metrics",
        &Body {
            counters,
            users: graph.user_count(),
            edges: graph.edge_count(),
            tasks,
            pet_ticks: app
                .pets
                .iter()
                .map(|(id, p)| (id.clone(), p.snapshot().tick))
                .collect(),
        },
    ))
}

async fn pet_stream(
    State(app): State<Arc<AppState>>,
    UrlPath(id): UrlPath<String>,
    ws: WebSocketUpgrade,
) -> Result<Response, ApiError> {
    app.pet(&id)?;
    Ok(ws.on_upgrade(move |socket| stream_session(app, id, socket)))
}

async fn stream_session(app: Arc<AppState>, pet_id: String, socket: WebSocket) {
    #[derive(Serialize)]
    struct Hello<'a> {
        pet: &'a str,
        tick: u64,
    }
    #[derive(Serialize)]
    struct Lagged<'a> {
        pet: &'a str,
        skipped: u64,
    }
    let Ok(pet) = app.pet(&pet_id) else { return };
    bump(&app.metrics.stream_sessions);
    let mut ticks = pet.subscribe();
    let mut last = pet.snapshot().tick;
    let mut stop = app.stop.clone();
    let (mut tx, mut rx) = socket.split();
    let send = |v: Value| Message::Text(v.to_string().into());
    if tx
        .send(send(envelope("hello", &Hello { pet: &pet_id, tick: last })))
        .await
        .is_err()
    {
        return;
    }
    loop {
        let out = tokio::select! {
            _ = stop.changed() => {
                let _ = tx.send(Message::Close(None)).await;
                break;
            }
            rec = ticks.recv() => match rec {
                // stream ticks start after the one announced in `hello`
                Ok(rec) if rec.tick <= last => continue,
                Ok(rec) => {
                    last = rec.tick;
                    envelope("tick", &TickMessage { pet: &pet_id, record: &rec })
                }
                Err(broadcast::error::RecvError::Lagged(skipped)) => {
                    envelope("lagged", &Lagged { pet: &pet_id, skipped })
                }
                Err(broadcast::error::RecvError::Closed) => break,
            },
            msg = rx.next() => match msg {
                Some(Ok(Message::Text(text))) => {
                    let answer = match serde_json::from_str::<ClientMessage>(text.as_str()) {
                        Ok(ClientMessage::Feed(req)) => app.feed(&pet_id, req).await,
                        Ok(ClientMessage::Environment(req)) => app.environment(&pet_id, req).await,
                        Err(e) => Err(ApiError::bad_request(format!("malformed message: {e}"))),
                    };
                    answer.unwrap_or_else(|e| e.body())
                }
                Some(Ok(Message::Close(_))) | None | Some(Err(_)) => break,
                Some(Ok(_)) => continue,
            },
        };
        bump(&app.metrics.stream_messages);
        if tx.send(send(out)).await.is_err() {
            break;
        }
    }
}

async fn count_requests(
    State(app): State<Arc<AppState>>,
    req: axum::extract::Request,
    next: axum::middleware::Next,
) -> Response {
    bump(&app.metrics.requests);
    let res = next.run(req).await;
    if res.status() == StatusCode::CONFLICT {
        bump(&app.metrics.conflicts);
    }
    if res.status().is_client_error() || res.status().is_server_error() {
        bump(&app.metrics.errors);
    }
    res
}

pub fn router(app: Arc<AppState>) -> Router {
    Router::new()
        .route("/pet/{id}/state", get(pet_state))
        .route("/pet/{id}/feed", post(pet_feed))
        .route("/pet/{id}/environment", post(pet_environment))
        .route("/pet/{id}/stream", get(pet_stream))
        .route("/users/{id}/recommendations", get(user_recommendations))
        .route("/users/{id}/reward", get(user_reward))
        .route("/tasks", post(issue_task))
        .route("/tasks/{id}/complete", post(complete_task))
        .route("/metrics", get(metrics))
        .layer(axum::middleware::from_fn_with_state(app.clone(), count_requests))
        .with_state(app)
}

fn load_ledger(cfg: &PlatformConfig, graph: &SocialGraph) -> Result<RewardLedger, ConfigError> {
    let mut ledger = match &cfg.ledger {
        Some(path) if path.exists() => {
            let text = std::fs::read_to_string(path).map_err(|source| ConfigError::Io {
                path: path.clone(),
                source,
            })?;
            serde_json::from_str(&text).map_err(|e| ConfigError::Parse {
                path: path.clone(),
                message: e.to_string(),
            })?
        }
        _ => RewardLedger::new(),
    };
    for u in graph.user_ids() {
        ledger.register(u.clone());
    }
    Ok(ledger)
}

/// A running service.
pub struct Service {
    addr: SocketAddr,
    state: Arc<AppState>,
    stop: watch::Sender<bool>,
    server: JoinHandle<std::io::Result<()>>,
    pets: Vec<JoinHandle<EmotionEngine>>,
    checkpoints: JoinHandle<()>,
}

impl Service {
    /// Loads data, binds the listener and starts the pet loops.
    pub async fn start(config: PlatformConfig) -> Result<Self, ServeError> {
        config.validate()?;
        let graph = config.load_graph()?;
        let ledger = load_ledger(&config, &graph)?;
        let stats = config.stats()?;
        let props: BTreeMap<PropId, PropItem> = config
            .prop_items()?
            .into_iter()
            .map(|p| (p.id.clone(), p))
            .collect();
        let listener = tokio::net::TcpListener::bind(&config.listen)
            .await
            .map_err(|source| ServeError::Bind {
                addr: config.listen.clone(),
                source,
            })?;
        let addr = listener.local_addr().map_err(ServeError::Server)?;

        let (stop_tx, stop_rx) = watch::channel(false);
        let mut pets = BTreeMap::new();
        let mut pet_joins = Vec::new();
        for (i, id) in config.pets.iter().enumerate() {
            let mut engine = EmotionEngine::new(config.engine.clone(), stats.clone())
                .map_err(|e| ConfigError::Invalid(e.to_string()))?;
            for p in props.values() {
                engine.register_prop(p.clone());
            }
            let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
            rng.set_stream(i as u64);
            let (handle, join) = PetHandle::spawn(
                id.clone(),
                engine,
                rng,
                Duration::from_millis(config.tick_ms),
                stop_rx.clone(),
            );
            pets.insert(id.clone(), handle);
            pet_joins.push(join);
        }

        let state = Arc::new(AppState {
            graph: GraphStore::new(graph),
            ledger: Mutex::new(ledger),
            pets,
            props,
            replies: Mutex::new(ReplyCache::default()),
            stop: stop_rx.clone(),
            metrics: Metrics::default(),
            config,
        });

        let checkpoints = {
            let state = state.clone();
            let mut stop = stop_rx.clone();
            let secs = state.config.checkpoint_secs;
            tokio::spawn(async move {
                if secs == 0 {
                    return;
                }
                let mut interval = tokio::time::interval(Duration::from_secs(secs));
                interval.tick().await;
                loop {
                    tokio::select! {
                        _ = stop.changed() => break,
                        _ = interval.tick() => {
                            if let Err(e) = state.persist() {
                                eprintln!("checkpoint failed: {e}");
                            }
                        }
                    }
                }
            })
        };

        let server = {
            let mut stop = stop_rx;
            let app = router(state.clone());
            tokio::spawn(async move {
                axum::serve(listener, app)
                    .with_graceful_shutdown(async move {
                        let _ = stop.wait_for(|s| *s).await;
                    })
                    .await
            })
        };

        Ok(Self {
            addr,
            state,
            stop: stop_tx,
            server,
            pets: pet_joins,
            checkpoints,
        })
    }

    pub fn addr(&self) -> SocketAddr {
        self.addr
    }

    pub fn state(&self) -> &Arc<AppState> {
        &self.state
    }

    /// Stops accepting requests, halts the pet loops and writes the graph.
    pub async fn shutdown(self) -> Result<(), ServeError> {
        let _ = self.stop.send(true);
        let served = self.server.await;
        let _ = self.checkpoints.await;
        for pet in self.pets {
            let _ = pet.await;
        }
        self.state.persist()?;
        match served {
            Ok(Ok(())) => Ok(()),
            Ok(Err(e)) => Err(ServeError::Server(e)),
            Err(e) => Err(ServeError::Server(std::io::Error::other(e))),
        }
    }
}

/// Runs until ctrl-c, then shuts down gracefully.
pub async fn serve(config: PlatformConfig) -> Result<(), ServeError> {
    let service = Service::start(config).await?;
    eprintln!("listening on http://{}", service.addr());
    let _ = tokio::signal::ctrl_c().await;
    eprintln!("shutting down");
    service.shutdown().await
}
