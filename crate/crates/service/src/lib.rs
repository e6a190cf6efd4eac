//! HTTP API over the retshield pipeline.
//!
//! Runs execute on blocking workers and append to an in-memory event log.
//! `GET /runs/{id}/events` streams that log as server-sent events: a new
//! subscriber first receives everything logged so far, then follows the
//! tail. Readers pull from the shared log by cursor, so a slow consumer
//! never holds a private queue.

mod stream;

use std::collections::BTreeMap;
use std::net::SocketAddr;
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::sync::atomic::{AtomicU64, Ordering};
use std::sync::{Arc, Mutex, RwLock};

use axum::extract::{Path, State};
use axum::http::{HeaderMap, StatusCode};
use axum::response::{IntoResponse, Response};
use axum::routing::get;
use axum::{Json, Router};
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};
use tokio::sync::watch;

use retshield::action::Action;
use retshield::control::{run_pipeline_with, Artifacts, ControlError, Event, Phase, RunConfig, RunMetrics};
use retshield::ltl::{negate, to_buchi, Intent};
use retshield::simnet::{init_network, CellState, KpiVector, NetworkConfig};

/// Intents loaded at startup.
pub const BUILTIN_INTENTS: [&str; 4] = [
    include_str!("../../../intents/phi1.intent"),
    include_str!("../../../intents/phi2.intent"),
    include_str!("../../../intents/phi3.intent"),
    include_str!("../../../intents/unreal.intent"),
];

#[derive(Debug)]
pub struct ApiError {
    status: StatusCode,
    message: String,
}

impl ApiError {
    fn new(status: StatusCode, message: impl Into<String>) -> Self {
        ApiError { status, message: message.into() }
    }

    fn not_found(what: &str, id: &str) -> Self {
        ApiError::new(StatusCode::NOT_FOUND, format!("no {what} `{id}`"))
    }
}

impl IntoResponse for ApiError {
    fn into_response(self) -> Response {
        (self.status, Json(json!({ "error": self.message }))).into_response()
    }
}

type ApiResult<T> = Result<T, ApiError>;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum RunStatus {
    Running,
    Finished,
    Failed,
}

#[derive(Debug, Clone, Serialize)]
pub struct RunFailure {
    /// `no_safe_trace`, `invalid_config` or `internal`.
    pub kind: &'static str,
    pub message: String,
}

impl RunFailure {
    fn of(e: &ControlError) -> Self {
        let kind = match e {
            ControlError::NoSafeTrace { .. } => "no_safe_trace",
            ControlError::InvalidConfig(_) => "invalid_config",
            _ => "internal",
        };
        RunFailure { kind, message: e.to_string() }
    }
}

struct RunLog {
    events: Vec<Event>,
    status: RunStatus,
    failure: Option<RunFailure>,
    metrics: Option<RunMetrics>,
    artifacts: Option<Artifacts>,
}

struct Run {
    id: String,
    intent: String,
    shield: bool,
    seed: u64,
    config: RunConfig,
    log: Mutex<RunLog>,
    /// Bumped after every append and on completion.
    tick: watch::Sender<u64>,
}

impl Run {
    fn push(&self, event: &Event) {
        self.log.lock().unwrap().events.push(event.clone());
        self.tick.send_modify(|n| *n += 1);
    }

    fn finish(&self, outcome: Result<(RunMetrics, Artifacts), RunFailure>) {
        {
            let mut log = self.log.lock().unwrap();
            match outcome {
                Ok((metrics, artifacts)) => {
                    log.status = RunStatus::Finished;
                    log.metrics = Some(metrics);
                    log.artifacts = Some(artifacts);
                }
                Err(f) => {
                    log.status = RunStatus::Failed;
                    log.failure = Some(f);
                }
            }
        }
        self.tick.send_modify(|n| *n += 1);
    }

    fn view(&self) -> RunView {
        let log = self.log.lock().unwrap();
        RunView {
            run_id: self.id.clone(),
            intent: self.intent.clone(),
            shield: self.shield,
            seed: self.seed,
            status: log.status,
            events: log.events.len(),
            metrics: log.metrics.clone(),
            error: log.failure.clone(),
        }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct RunView {
    pub run_id: String,
    pub intent: String,
    pub shield: bool,
    pub seed: u64,
    pub status: RunStatus,
    pub events: usize,
    pub metrics: Option<RunMetrics>,
    pub error: Option<RunFailure>,
}

#[derive(Debug, Clone, Serialize)]
pub struct CellView {
    #[serde(flatten)]
    pub cell: CellState<f64>,
    pub kpi: KpiVector<f64>,
}

#[derive(Debug, Clone, Serialize)]
pub struct IntentView {
    pub id: String,
    pub name: Option<String>,
    pub formula: String,
    pub propositions: Value,
    pub file: String,
}

fn intent_view(id: &str, intent: &Intent) -> IntentView {
    IntentView {
        id: id.to_string(),
        name: intent.name.clone(),
        formula: intent.text.clone(),
        propositions: serde_json::to_value(&intent.bindings).unwrap_or(Value::Null),
        file: intent.to_file_text(),
    }
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CreateIntent {
    /// Intent file text.
    pub text: String,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct StartRun {
    pub intent: String,
    #[serde(default = "yes")]
    pub shield: bool,
    /// Defaults to the first seed of the effective config.
    pub seed: Option<u64>,
    /// Replaces the server's base config; its `intent` and `shield` are ignored.
    pub config: Option<RunConfig>,
}

fn yes() -> bool {
    true
}

struct Inner {
    base: RunConfig,
    cells: Vec<CellView>,
    intents: RwLock<BTreeMap<String, Intent>>,
    runs: RwLock<BTreeMap<String, Arc<Run>>>,
    next_run: AtomicU64,
    next_intent: AtomicU64,
}

/// Shared service state. Cheap to clone.
#[derive(Clone)]
pub struct AppState(Arc<Inner>);

impl AppState {
    /// `base` supplies the network for `/cells` and the default run config.
    pub fn new(base: RunConfig, intents: Vec<Intent>) -> Result<Self, ControlError> {
        base.validate()?;
        let sim = init_network::<f64>(NetworkConfig { seed: base.seeds[0], ..base.network.clone() })?;
        let cells = sim.cells().iter().zip(sim.kpis()).map(|(c, k)| CellView { cell: c.clone(), kpi: *k }).collect();
        let state = AppState(Arc::new(Inner {
            base,
            cells,
            intents: RwLock::new(BTreeMap::new()),
            runs: RwLock::new(BTreeMap::new()),
            next_run: AtomicU64::new(1),
            next_intent: AtomicU64::new(1),
        }));
        for intent in intents {
            state.add_intent(intent).map_err(|e| ControlError::InvalidConfig(e.message))?;
        }
        Ok(state)
    }

    /// State with the built-in intents.
    pub fn with_builtin(base: RunConfig) -> Result<Self, ControlError> {
        let intents = BUILTIN_INTENTS.iter().map(|t| Intent::from_file_text(t)).collect::<Result<Vec<_>, _>>()?;
        AppState::new(base, intents)
    }

    /// Registers an intent under its name, or a generated id if unnamed.
    pub fn add_intent(&self, intent: Intent) -> ApiResult<String> {
        let id = match &intent.name {
            Some(name) => slug(name),
            None => format!("intent-{}", self.0.next_intent.fetch_add(1, Ordering::Relaxed)),
        };
        let mut intents = self.0.intents.write().unwrap();
        if intents.contains_key(&id) {
            return Err(ApiError::new(StatusCode::CONFLICT, format!("intent `{id}` already exists")));
        }
        intents.insert(id.clone(), intent);
        Ok(id)
    }

    fn intent(&self, id: &str) -> ApiResult<Intent> {
        self.0.intents.read().unwrap().get(id).cloned().ok_or_else(|| ApiError::not_found("intent", id))
    }

    fn run(&self, id: &str) -> ApiResult<Arc<Run>> {
        self.0.runs.read().unwrap().get(id).cloned().ok_or_else(|| ApiError::not_found("run", id))
    }

    /// Validates the request and starts the run on a blocking worker.
    pub fn start_run(&self, req: StartRun) -> ApiResult<RunView> {
        let intent = self.intent(&req.intent)?;
        let mut config = req.config.unwrap_or_else(|| self.0.base.clone());
        config.shield = req.shield;
        let seed = match req.seed {
            Some(s) => s,
            None => {
                *config.seeds.first().ok_or_else(|| ApiError::new(StatusCode::BAD_REQUEST, "seeds must be nonempty"))?
            }
        };
        config.seeds = vec![seed];
        config.validate().map_err(|e| ApiError::new(StatusCode::BAD_REQUEST, e.to_string()))?;

        let id = format!("run-{}", self.0.next_run.fetch_add(1, Ordering::Relaxed));
        let run = Arc::new(Run {
            id: id.clone(),
            intent: req.intent,
            shield: config.shield,
            seed,
            config,
            log: Mutex::new(RunLog {
                events: Vec::new(),
                status: RunStatus::Running,
                failure: None,
                metrics: None,
                artifacts: None,
            }),
            tick: watch::Sender::new(0),
        });
        self.0.runs.write().unwrap().insert(id, run.clone());
        let view = run.view();
        tokio::task::spawn_blocking(move || {
            let outcome = catch_unwind(AssertUnwindSafe(|| {
                run_pipeline_with::<f64>(&run.config, &intent, seed, &mut |e: &Event| run.push(e))
            }));
            run.finish(match outcome {
                Ok(Ok(record)) => Ok((record.metrics, record.artifacts)),
                Ok(Err(e)) => Err(RunFailure::of(&e)),
                Err(_) => Err(RunFailure { kind: "internal", message: "run worker panicked".into() }),
            });
        });
        Ok(view)
    }
}

fn slug(name: &str) -> String {
    name.chars().map(|c| if c.is_ascii_alphanumeric() || c == '-' || c == '_' { c } else { '-' }).collect()
}

pub fn router(state: AppState) -> Router {
    Router::new()
        .route("/cells", get(list_cells))
        .route("/intents", get(list_intents).post(create_intent))
        .route("/intents/{id}", get(get_intent))
        .route("/intents/{id}/ba", get(get_ba))
        .route("/runs", get(list_runs).post(start_run))
        .route("/runs/{id}", get(get_run))
        .route("/runs/{id}/cmdp", get(get_cmdp))
        .route("/runs/{id}/events", get(run_events))
        .with_state(state)
}

/// Binds `addr` and serves until the process exits.
pub async fn serve(addr: SocketAddr, state: AppState) -> std::io::Result<()> {
    let listener = tokio::net::TcpListener::bind(addr).await?;
    axum::serve(listener, router(state)).await
}

async fn list_cells(State(s): State<AppState>) -> Json<Value> {
    Json(json!({ "cells": s.0.cells }))
}

async fn list_intents(State(s): State<AppState>) -> Json<Vec<IntentView>> {
    Json(s.0.intents.read().unwrap().iter().map(|(id, i)| intent_view(id, i)).collect())
}

async fn create_intent(
    State(s): State<AppState>,
    Json(req): Json<CreateIntent>,
) -> ApiResult<(StatusCode, Json<IntentView>)> {
    let intent =
        Intent::from_file_text(&req.text).map_err(|e| ApiError::new(StatusCode::BAD_REQUEST, e.to_string()))?;
    // reject intents whose automata cannot be built before they are listed
    to_buchi(&intent.formula, &intent.bindings).map_err(|e| ApiError::new(StatusCode::BAD_REQUEST, e.to_string()))?;
    let id = s.add_intent(intent.clone())?;
    Ok((StatusCode::CREATED, Json(intent_view(&id, &intent))))
}

async fn get_intent(State(s): State<AppState>, Path(id): Path<String>) -> ApiResult<Json<IntentView>> {
    Ok(Json(intent_view(&id, &s.intent(&id)?)))
}

async fn get_ba(State(s): State<AppState>, Path(id): Path<String>) -> ApiResult<Json<Value>> {
    let intent = s.intent(&id)?;
    let internal = |e: retshield::ltl::LtlError| ApiError::new(StatusCode::INTERNAL_SERVER_ERROR, e.to_string());
    let pos = to_buchi(&intent.formula, &intent.bindings).map_err(internal)?;
    let neg = to_buchi(&negate(&intent.formula), &intent.bindings).map_err(internal)?;
    Ok(Json(json!({
        "intent": id,
        "dot": pos.to_dot(),
        "states": pos.num_states(),
        "accepting": pos.accepting_states().count(),
        "negated": {
            "dot": neg.to_dot(),
            "states": neg.num_states(),
            "accepting": neg.accepting_states().count(),
        },
    })))
}

async fn list_runs(State(s): State<AppState>) -> Json<Vec<RunView>> {
    Json(s.0.runs.read().unwrap().values().map(|r| r.view()).collect())
}

async fn start_run(State(s): State<AppState>, Json(req): Json<StartRun>) -> ApiResult<(StatusCode, Json<RunView>)> {
    Ok((StatusCode::ACCEPTED, Json(s.start_run(req)?)))
}

async fn get_run(State(s): State<AppState>, Path(id): Path<String>) -> ApiResult<Json<RunView>> {
    Ok(Json(s.run(&id)?.view()))
}

/// Per abstract state: evaluation-phase proposals, chosen and blocked
/// actions, indexed by [`Action::index`].
#[derive(Debug, Default, Serialize)]
struct ActionTally {
    proposed: [u64; 3],
    chosen: [u64; 3],
    blocked: [u64; 3],
}

async fn get_cmdp(State(s): State<AppState>, Path(id): Path<String>) -> ApiResult<Json<Value>> {
    let run = s.run(&id)?;
    let log = run.log.lock().unwrap();
    let mut model = Value::Null;
    let mut tally: BTreeMap<&str, ActionTally> = BTreeMap::new();
    for e in &log.events {
        match e {
            Event::Model { .. } => model = serde_json::to_value(e).unwrap_or(Value::Null),
            Event::Step(st) if st.phase == Phase::Evaluation => {
                let t = tally.entry(st.state.as_str()).or_default();
                t.proposed[st.proposed.index()] += 1;
                t.chosen[st.chosen.index()] += 1;
                if st.blocked {
                    t.blocked[st.proposed.index()] += 1;
                }
            }
            _ => {}
        }
    }
    let graphs = log.artifacts.as_ref().map(|a| {
        json!({
            "cmdp_dot": a.cmdp_dot,
            "cmdp": serde_json::from_str::<Value>(&a.cmdp_json).unwrap_or(Value::Null),
            "product_dot": a.product_dot,
            "witnesses": serde_json::from_str::<Value>(&a.witnesses_json).unwrap_or(Value::Null),
        })
    });
    Ok(Json(json!({
        "run_id": run.id,
        "status": log.status,
        "actions": Action::ALL,
        "model": model,
        "states": tally,
        "graphs": graphs,
    })))
}

async fn run_events(
    State(s): State<AppState>,
    Path(id): Path<String>,
    headers: HeaderMap,
) -> ApiResult<impl IntoResponse> {
    let run = s.run(&id)?;
    // resume after the last delivered id
    let from = headers
        .get("last-event-id")
        .and_then(|v| v.to_str().ok())
        .and_then(|v| v.trim().parse::<usize>().ok())
        .map_or(0, |n| n + 1);
    Ok(stream::sse(run, from))
}
