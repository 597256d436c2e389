// SPDX-License-Identifier: Apache-2.0

//! HTTP API over a [`Store`] plus in-memory live sessions.
//!
//! Teacher endpoints (record ingest and lookup, cohort reports) require the
//! bearer token when one is configured. Scenario delivery and live session
//! driving are open to the trainee client.

use std::collections::{BTreeMap, HashMap};
use std::net::SocketAddr;
use std::path::PathBuf;
use std::sync::atomic::{AtomicU64, Ordering};
use std::sync::{Arc, Mutex};

use axum::extract::{Path, Query, Request, State};
use axum::http::{header, HeaderMap, StatusCode};
use axum::middleware::{self, Next};
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post};
use axum::{Json, Router};
use serde::{Deserialize, Serialize};
use tower_http::services::ServeDir;
use trainer_core::analytics::{render_text, CohortReport};
use trainer_core::bus::ActionType;
use trainer_core::canonical;
use trainer_core::scenario::fixture::VERANO_ID;
use trainer_core::scenario::{serialize_scenario, Direction, PartState};
use trainer_core::session::{ErrorEntry, ErrorKind, HeldTool, Progress, Status};
use trainer_core::store::{now_ms, valid_session_id, StoreError};
use trainer_core::{Attempt, HintConfig, Mode, ScoreReport, ScoringRules, Session, SessionRecord, Store};

pub struct AppState {
    store: Arc<Store>,
    token: Option<String>,
    live: Mutex<HashMap<String, Arc<Mutex<Live>>>>,
    counter: AtomicU64,
}

struct Live {
    session: Session,
    student_id: Option<String>,
    group: Option<String>,
    stored: bool,
}

impl AppState {
    pub fn new(store: Arc<Store>, token: Option<String>) -> Arc<Self> {
        Arc::new(Self { store, token, live: Mutex::new(HashMap::new()), counter: AtomicU64::new(0) })
    }

    fn live(&self, id: &str) -> Result<Arc<Mutex<Live>>, ApiError> {
        self.live
            .lock()
            .expect("live map")
            .get(id)
            .cloned()
            .ok_or_else(|| ApiError::not_found(format!("no live session `{id}`")))
    }
}

#[derive(Debug)]
pub struct ApiError {
    status: StatusCode,
    message: String,
}

impl ApiError {
    fn new(status: StatusCode, message: impl Into<String>) -> Self {
        Self { status, message: message.into() }
    }

    fn not_found(message: impl Into<String>) -> Self {
        Self::new(StatusCode::NOT_FOUND, message)
    }

    fn bad_request(message: impl Into<String>) -> Self {
        Self::new(StatusCode::BAD_REQUEST, message)
    }
}

impl From<StoreError> for ApiError {
    fn from(e: StoreError) -> Self {
        let status = match e {
            StoreError::Parse(_) | StoreError::InvalidId(_) => StatusCode::BAD_REQUEST,
            StoreError::Duplicate(_) => StatusCode::CONFLICT,
            StoreError::ReplayMismatch(_) | StoreError::UnknownScenario(_) => StatusCode::UNPROCESSABLE_ENTITY,
            StoreError::Io(_) | StoreError::Catalog { .. } => StatusCode::INTERNAL_SERVER_ERROR,
        };
        Self::new(status, e.to_string())
    }
}

impl IntoResponse for ApiError {
    fn into_response(self) -> Response {
        (self.status, Json(serde_json::json!({ "error": self.message }))).into_response()
    }
}

type ApiResult<T> = Result<T, ApiError>;

/// JSON body in canonical form, so equal state gives equal bytes.
fn canonical_json<T: Serialize>(status: StatusCode, value: &T) -> Response {
    let body = canonical::to_string(value).expect("response values serialize");
    (status, [(header::CONTENT_TYPE, "application/json")], body).into_response()
}

pub fn router(state: Arc<AppState>, ui: Option<PathBuf>) -> Router {
    let teacher = Router::new()
        .route("/v1/sessions", post(ingest))
        .route("/v1/sessions/{id}", get(get_session))
        .route("/v1/cohorts/{group}/report", get(cohort_report))
        .route_layer(middleware::from_fn_with_state(Arc::clone(&state), require_token));
    let open = Router::new()
        .route("/v1/scenarios", get(list_scenarios))
        .route("/v1/scenarios/{id}", get(get_scenario))
        .route("/v1/live", post(start_live))
        .route("/v1/live/{id}/attempt", post(live_attempt))
        .route("/v1/live/{id}/abandon", post(live_abandon))
        .route("/v1/live/{id}/state", get(live_state));
    let app = teacher.merge(open).with_state(state);
    match ui {
        Some(dir) => app.fallback_service(ServeDir::new(dir)),
        None => app,
    }
}

async fn require_token(State(state): State<Arc<AppState>>, headers: HeaderMap, req: Request, next: Next) -> Response {
    if let Some(expected) = &state.token {
        let given = headers
            .get(header::AUTHORIZATION)
            .and_then(|v| v.to_str().ok())
            .and_then(|v| v.strip_prefix("Bearer "))
            .unwrap_or("");
        if !constant_time_eq(given.as_bytes(), expected.as_bytes()) {
            return ApiError::new(StatusCode::UNAUTHORIZED, "missing or wrong bearer token").into_response();
        }
    }
    next.run(req).await
}

fn constant_time_eq(a: &[u8], b: &[u8]) -> bool {
    a.len() == b.len() && a.iter().zip(b).fold(0u8, |acc, (x, y)| acc | (x ^ y)) == 0
}

#[derive(Serialize)]
struct Ingested {
    session_id: String,
    score: f64,
}

async fn ingest(State(state): State<Arc<AppState>>, body: String) -> ApiResult<Response> {
    let store = Arc::clone(&state.store);
    let stored = tokio::task::spawn_blocking(move || store.ingest(&body))
        .await
        .map_err(|e| ApiError::new(StatusCode::INTERNAL_SERVER_ERROR, e.to_string()))??;
    let mut resp = canonical_json(
        StatusCode::CREATED,
        &Ingested { session_id: stored.session_id.clone(), score: stored.score_report.score },
    );
    if let Ok(v) = format!("/v1/sessions/{}", stored.session_id).parse() {
        resp.headers_mut().insert(header::LOCATION, v);
    }
    Ok(resp)
}

async fn get_session(State(state): State<Arc<AppState>>, Path(id): Path<String>) -> ApiResult<Response> {
    match state.store.get(&id)? {
        Some(s) => Ok(canonical_json(StatusCode::OK, &s)),
        None => Err(ApiError::not_found(format!("no session `{id}`"))),
    }
}

#[derive(Deserialize)]
struct ReportQuery {
    scenario: Option<String>,
    format: Option<String>,
}

async fn cohort_report(
    State(state): State<Arc<AppState>>,
    Path(group): Path<String>,
    Query(q): Query<ReportQuery>,
) -> ApiResult<Response> {
    let scenario = q.scenario.as_deref().unwrap_or(VERANO_ID);
    let cohort = state.store.query_cohort(&group, scenario)?;
    let report = CohortReport::build(&cohort);
    match q.format.as_deref() {
        None | Some("json") => Ok(canonical_json(StatusCode::OK, &report)),
        Some("text") => Ok((StatusCode::OK, render_text(&[report])).into_response()),
        Some(other) => Err(ApiError::bad_request(format!("unknown format `{other}`"))),
    }
}

#[derive(Serialize)]
struct ScenarioSummary {
    id: String,
    engine_name: String,
    direction: Direction,
    steps: usize,
}

async fn list_scenarios(State(state): State<Arc<AppState>>) -> Response {
    let list: Vec<ScenarioSummary> = state
        .store
        .catalog()
        .iter()
        .map(|s| ScenarioSummary {
            id: s.id.clone(),
            engine_name: s.engine_name.clone(),
            direction: s.direction,
            steps: s.steps.len(),
        })
        .collect();
    canonical_json(StatusCode::OK, &list)
}

async fn get_scenario(State(state): State<Arc<AppState>>, Path(id): Path<String>) -> ApiResult<Response> {
    let sc = state.store.catalog().get(&id).ok_or_else(|| ApiError::not_found(format!("no scenario `{id}`")))?;
    Ok((StatusCode::OK, [(header::CONTENT_TYPE, "application/json")], serialize_scenario(sc)).into_response())
}

#[derive(Deserialize)]
#[serde(untagged)]
enum HintsParam {
    Preset(String),
    Channels(HintConfig),
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct StartLive {
    #[serde(default)]
    session_id: Option<String>,
    #[serde(default)]
    scenario: Option<String>,
    #[serde(default = "training")]
    mode: Mode,
    #[serde(default)]
    hints: Option<HintsParam>,
    #[serde(default)]
    student_id: Option<String>,
    #[serde(default)]
    group: Option<String>,
}

fn training() -> Mode {
    Mode::Training
}

#[derive(Serialize)]
struct HintView {
    step: String,
    channel: String,
    text: String,
}

#[derive(Serialize)]
pub struct LiveState {
    session_id: String,
    scenario_id: String,
    mode: Mode,
    status: Status,
    progress: Progress,
    /// Next possible steps. Withheld in examination mode.
    #[serde(skip_serializing_if = "Option::is_none")]
    candidates: Option<Vec<String>>,
    hints: Vec<HintView>,
    #[serde(skip_serializing_if = "Option::is_none")]
    held_tool: Option<HeldTool>,
    part_states: BTreeMap<String, PartState>,
    errors: Vec<ErrorEntry>,
    events: usize,
    #[serde(skip_serializing_if = "Option::is_none")]
    report: Option<ScoreReport>,
    stored: bool,
}

fn state_of(live: &Live) -> LiveState {
    let s = &live.session;
    let exam = s.mode() == Mode::Examination;
    let mut hints = Vec::new();
    if !exam {
        for e in s.events() {
            match e.action {
                ActionType::StepCompleted => hints.clear(),
                ActionType::HintIssued => hints.push(HintView {
                    step: e.target.clone(),
                    channel: e.get("channel").and_then(|v| v.as_str()).unwrap_or_default().to_owned(),
                    text: e.get("text").and_then(|v| v.as_str()).unwrap_or_default().to_owned(),
                }),
                _ => {}
            }
        }
    }
    LiveState {
        session_id: s.id().to_owned(),
        scenario_id: s.scenario().id.clone(),
        mode: s.mode(),
        status: s.status(),
        progress: s.progress(),
        candidates: (!exam).then(|| s.candidates().to_vec()),
        hints,
        held_tool: s.held_tool().cloned(),
        part_states: s.part_states().clone(),
        errors: s.error_log().to_vec(),
        events: s.events().len(),
        report: s.score_report().ok(),
        stored: live.stored,
    }
}

async fn start_live(State(state): State<Arc<AppState>>, Json(req): Json<StartLive>) -> ApiResult<Response> {
    let scenario_id = req.scenario.as_deref().unwrap_or(VERANO_ID);
    let scenario = state
        .store
        .catalog()
        .get(scenario_id)
        .cloned()
        .ok_or_else(|| ApiError::not_found(format!("no scenario `{scenario_id}`")))?;
    let hints = match req.hints {
        None => HintConfig::T3,
        Some(HintsParam::Channels(h)) => h,
        Some(HintsParam::Preset(p)) => p.parse().map_err(|e: String| ApiError::bad_request(e))?,
    };
    let id = req
        .session_id
        .unwrap_or_else(|| format!("live-{}-{}", now_ms(), state.counter.fetch_add(1, Ordering::Relaxed)));
    if !valid_session_id(&id) {
        return Err(ApiError::bad_request(format!("invalid session id `{id}`")));
    }
    let rules = ScoringRules::default_for(&scenario);
    let session = Session::start(id.clone(), scenario, req.mode, hints, rules)
        .map_err(|e| ApiError::new(StatusCode::UNPROCESSABLE_ENTITY, e.to_string()))?;
    let live = Live { session, student_id: req.student_id, group: req.group, stored: false };
    {
        let mut map = state.live.lock().expect("live map");
        if map.contains_key(&id) || state.store.get(&id)?.is_some() {
            return Err(ApiError::new(StatusCode::CONFLICT, format!("session `{id}` exists")));
        }
        map.insert(id.clone(), Arc::new(Mutex::new(live)));
    }
    let entry = state.live(&id)?;
    let mut guard = entry.lock().expect("session lock");
    persist_if_finished(&state, &mut guard)?;
    Ok(canonical_json(StatusCode::CREATED, &state_of(&guard)))
}

/// Finished sessions go to the store once. Runs under the session lock,
/// so the session cannot change meanwhile.
fn persist_if_finished(state: &AppState, live: &mut Live) -> ApiResult<()> {
    if live.stored || !live.session.is_finished() {
        return Ok(());
    }
    let record = SessionRecord::from_session(&live.session, live.student_id.clone(), live.group.clone())
        .map_err(|e| ApiError::new(StatusCode::INTERNAL_SERVER_ERROR, e.to_string()))?;
    state.store.ingest_record(record, now_ms())?;
    live.stored = true;
    Ok(())
}

#[derive(Serialize)]
struct AttemptResponse {
    accepted: bool,
    #[serde(skip_serializing_if = "Option::is_none")]
    error: Option<ErrorKind>,
    state: LiveState,
}

async fn live_attempt(
    State(state): State<Arc<AppState>>,
    Path(id): Path<String>,
    Json(attempt): Json<Attempt>,
) -> ApiResult<Response> {
    let entry = state.live(&id)?;
    let state2 = Arc::clone(&state);
    tokio::task::spawn_blocking(move || {
        let mut live = entry.lock().expect("session lock");
        let outcome = live.session.attempt(&attempt).map_err(|e| ApiError::new(StatusCode::CONFLICT, e.to_string()))?;
        persist_if_finished(&state2, &mut live)?;
        Ok(canonical_json(
            StatusCode::OK,
            &AttemptResponse { accepted: outcome.accepted, error: outcome.error, state: state_of(&live) },
        ))
    })
    .await
    .map_err(|e| ApiError::new(StatusCode::INTERNAL_SERVER_ERROR, e.to_string()))?
}

#[derive(Deserialize, Default)]
struct AbandonBody {
    #[serde(default)]
    t_ms: u64,
}

async fn live_abandon(
    State(state): State<Arc<AppState>>,
    Path(id): Path<String>,
    body: Option<Json<AbandonBody>>,
) -> ApiResult<Response> {
    let entry = state.live(&id)?;
    let t_ms = body.map(|b| b.0.t_ms).unwrap_or_default();
    let state2 = Arc::clone(&state);
    tokio::task::spawn_blocking(move || {
        let mut live = entry.lock().expect("session lock");
        live.session.abandon(t_ms).map_err(|e| ApiError::new(StatusCode::CONFLICT, e.to_string()))?;
        persist_if_finished(&state2, &mut live)?;
        Ok(canonical_json(StatusCode::OK, &state_of(&live)))
    })
    .await
    .map_err(|e| ApiError::new(StatusCode::INTERNAL_SERVER_ERROR, e.to_string()))?
}

async fn live_state(State(state): State<Arc<AppState>>, Path(id): Path<String>) -> ApiResult<Response> {
    let entry = state.live(&id)?;
    let live = entry.lock().expect("session lock");
    Ok(canonical_json(StatusCode::OK, &state_of(&live)))
}

/// Binds, prints the bound address on stdout, and serves until Ctrl-C.
pub async fn serve(
    store: Arc<Store>,
    addr: SocketAddr,
    token: Option<String>,
    ui: Option<PathBuf>,
) -> std::io::Result<()> {
    let listener = tokio::net::TcpListener::bind(addr).await?;
    let local = listener.local_addr()?;
    println!("listening on http://{local}");
    let app = router(AppState::new(store, token), ui);
    axum::serve(listener, app)
        .with_graceful_shutdown(async {
            let _ = tokio::signal::ctrl_c().await;
        })
        .await
}
