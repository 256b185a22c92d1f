use std::collections::BTreeMap;
use std::convert::Infallible;
use std::sync::Arc;
use std::time::Duration;

use axum::body::Bytes;
use axum::extract::{Path, Query, State};
use axum::http::{header, HeaderMap, StatusCode};
use axum::response::sse::{Event as SseEvent, KeepAlive, Sse};
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post};
use axum::{Json, Router};
use futures::Stream;
use serde::{Deserialize, Serialize};
use serde_json::json;
use slicevis_core::frame::{ingest_csv, ColumnKind, DatasetSummary};
use slicevis_core::model::{connect_external, ExternalOptions, InputField, ModelInfo};
use slicevis_core::section::{ConditionPayload, SectionPoint};
use slicevis_core::session::{Mutation, Session, SessionInfo, SessionSpec, TourRequest, Update};
use slicevis_core::simulate::{simulate, SimKind};
use slicevis_core::tour::{CancelToken, Tour};
use slicevis_core::{fit_builtin, BuiltinSpec, Error, ModelHandle, PredictionKind, Roles, SectionPayload, SimilarityConfig};
use tokio::sync::broadcast;

use crate::error::{ApiError, ApiResult};
use crate::store::{Event, SessionSlot, Store};

pub type AppState = Arc<Store>;

pub fn router(store: AppState) -> Router {
    Router::new()
        .route("/health", get(|| async { Json(json!({ "status": "ok", "schema": slicevis_core::section::PAYLOAD_SCHEMA })) }))
        .route("/datasets", post(create_dataset))
        .route("/datasets/{id}", get(get_dataset))
        .route("/models", post(create_model))
        .route("/models/{id}", get(get_model))
        .route("/sessions", post(create_session))
        .route("/sessions/{id}", get(get_session).patch(mutate_session).delete(close_session))
        .route("/sessions/{id}/section", get(get_section))
        .route("/sessions/{id}/conditions", get(get_conditions))
        .route("/sessions/{id}/tours", post(start_tour))
        .route("/sessions/{id}/cancel", post(cancel_tour))
        .route("/sessions/{id}/play", post(play_tour))
        .route("/sessions/{id}/pause", post(pause_tour))
        .route("/sessions/{id}/events", get(events))
        .route("/sessions/{id}/log", get(get_log))
        .route("/sessions/{id}/visited", get(get_visited))
        .with_state(store)
}

async fn blocking<T: Send + 'static>(f: impl FnOnce() -> ApiResult<T> + Send + 'static) -> ApiResult<T> {
    tokio::task::spawn_blocking(f).await.map_err(|e| ApiError::Internal(e.to_string()))?
}

fn parse_json<T: for<'de> Deserialize<'de>>(body: &[u8]) -> ApiResult<T> {
    serde_json::from_slice(body).map_err(|e| ApiError::BadRequest(format!("invalid request body: {e}")))
}

// ---- datasets

#[derive(Debug, Deserialize)]
#[serde(rename_all = "camelCase")]
struct SimulateRequest {
    kind: SimKind,
    n: usize,
    p: usize,
    #[serde(default)]
    seed: u64,
}

#[derive(Debug, Deserialize)]
#[serde(rename_all = "camelCase", deny_unknown_fields)]
struct DatasetRequest {
    #[serde(default)]
    csv: Option<String>,
    #[serde(default)]
    schema: BTreeMap<String, ColumnKind>,
    #[serde(default)]
    simulate: Option<SimulateRequest>,
}

/// Accepts raw `text/csv`, or JSON with either `csv` (plus optional
/// `schema` overrides) or `simulate`.
async fn create_dataset(State(store): State<AppState>, headers: HeaderMap, body: Bytes) -> ApiResult<impl IntoResponse> {
    let is_csv = headers
        .get(header::CONTENT_TYPE)
        .and_then(|v| v.to_str().ok())
        .is_some_and(|v| v.starts_with("text/csv") || v.starts_with("text/plain"));
    let req = if is_csv {
        DatasetRequest { csv: Some(String::from_utf8_lossy(&body).into_owned()), schema: BTreeMap::new(), simulate: None }
    } else {
        parse_json(&body)?
    };
    let summary = blocking(move || {
        let (df, dropped) = match (req.csv, req.simulate) {
            (Some(csv), None) => {
                let (df, report) = ingest_csv(csv.as_bytes(), &req.schema)?;
                (df, report.rows_dropped)
            }
            (None, Some(s)) => (simulate(s.kind, s.n, s.p, s.seed)?, 0),
            _ => return Err(ApiError::BadRequest("give exactly one of `csv` and `simulate`".into())),
        };
        Ok(store.add_dataset(df, dropped).summary.clone())
    })
    .await?;
    Ok((StatusCode::CREATED, Json(summary)))
}

async fn get_dataset(State(store): State<AppState>, Path(id): Path<String>) -> ApiResult<Json<DatasetSummary>> {
    Ok(Json(store.dataset(&id)?.summary.clone()))
}

// ---- models

#[derive(Debug, Deserialize)]
#[serde(untagged)]
enum BuiltinInput {
    Text(String),
    Spec(BuiltinSpec),
}

#[derive(Debug, Deserialize)]
#[serde(rename_all = "camelCase")]
struct ExternalRequest {
    endpoint: String,
    kind: PredictionKind,
    #[serde(default)]
    timeout_ms: Option<u64>,
    #[serde(default)]
    max_in_flight: Option<usize>,
    #[serde(default)]
    levels: Option<Vec<String>>,
}

#[derive(Debug, Deserialize)]
#[serde(rename_all = "camelCase", deny_unknown_fields)]
struct ModelRequest {
    #[serde(default)]
    id: Option<String>,
    dataset_id: String,
    #[serde(default)]
    response: Option<String>,
    /// Defaults to every column except the response.
    #[serde(default)]
    inputs: Option<Vec<String>>,
    #[serde(default)]
    builtin: Option<BuiltinInput>,
    #[serde(default)]
    external: Option<ExternalRequest>,
    /// Reported kind, e.g. `class` for a probabilistic classifier.
    #[serde(default)]
    kind: Option<PredictionKind>,
}

async fn create_model(State(store): State<AppState>, body: Bytes) -> ApiResult<impl IntoResponse> {
    let req: ModelRequest = parse_json(&body)?;
    let ds = store.dataset(&req.dataset_id)?;
    let info = blocking(move || {
        let inputs = req.inputs.clone().unwrap_or_else(|| {
            ds.df.names().filter(|n| Some(*n) != req.response.as_deref()).map(str::to_string).collect()
        });
        let id = req.id.clone().unwrap_or_else(|| "model".into());
        let model: ModelHandle = match (req.builtin, req.external) {
            (Some(b), None) => {
                let spec = match b {
                    BuiltinInput::Text(s) => s.parse()?,
                    BuiltinInput::Spec(s) => s,
                };
                fit_builtin(&spec, &ds.df, req.response.as_deref(), &inputs)?.with_id(id)
            }
            (None, Some(x)) => {
                let defaults = ExternalOptions::default();
                let opts = ExternalOptions {
                    timeout: x.timeout_ms.map_or(defaults.timeout, Duration::from_millis),
                    max_in_flight: x.max_in_flight.unwrap_or(defaults.max_in_flight),
                };
                let schema = InputField::schema_of(&ds.df, &inputs)?;
                let m = connect_external(id, &x.endpoint, x.kind, schema, opts)?;
                match x.levels {
                    Some(l) => m.with_levels(l),
                    None => m,
                }
            }
            _ => return Err(ApiError::BadRequest("give exactly one of `builtin` and `external`".into())),
        };
        let model = match req.kind {
            Some(k) => model.with_kind(k)?,
            None => model,
        };
        Ok(store.add_model(model, req.id.is_some())?.info())
    })
    .await?;
    Ok((StatusCode::CREATED, Json(info)))
}

async fn get_model(State(store): State<AppState>, Path(id): Path<String>) -> ApiResult<Json<ModelInfo>> {
    Ok(Json(store.model(&id)?.info()))
}

// ---- sessions

#[derive(Debug, Deserialize)]
#[serde(rename_all = "camelCase", deny_unknown_fields)]
struct SessionRequest {
    dataset_id: String,
    #[serde(default)]
    models: Vec<String>,
    section: Vec<String>,
    #[serde(default)]
    response: Option<String>,
    #[serde(default)]
    hidden: Vec<String>,
    /// Defaults to every remaining column.
    #[serde(default)]
    conditioning: Option<Vec<String>>,
    #[serde(default)]
    color_var: Option<String>,
    #[serde(default)]
    initial_point: Option<SectionPoint>,
    #[serde(default)]
    similarity: Option<SimilarityConfig>,
    #[serde(default)]
    seed: u64,
    #[serde(default)]
    condition_cap: Option<usize>,
    #[serde(default)]
    resolution: Option<Vec<usize>>,
}

#[derive(Debug, Serialize)]
#[serde(rename_all = "camelCase")]
struct SessionCreated {
    session: SessionInfo,
    section: SectionPayload,
    conditions: ConditionPayload,
}

async fn create_session(State(store): State<AppState>, body: Bytes) -> ApiResult<impl IntoResponse> {
    let req: SessionRequest = parse_json(&body)?;
    let ds = store.dataset(&req.dataset_id)?;
    let models = req.models.iter().map(|m| store.model(m)).collect::<ApiResult<Vec<_>>>()?;
    let id = store.new_session_id();
    let st = store.clone();
    let created = blocking(move || {
        let roles = match req.conditioning {
            Some(conditioning) => Roles { section: req.section, conditioning, hidden: req.hidden, response: req.response },
            None => Roles::infer(&ds.df, req.response.as_deref(), &req.section, &req.hidden),
        };
        let mut spec = SessionSpec::new(roles);
        spec.color_var = req.color_var;
        spec.initial_point = req.initial_point;
        spec.similarity = req.similarity.unwrap_or_default();
        spec.seed = req.seed;
        spec.resolution = req.resolution;
        if let Some(cap) = req.condition_cap {
            spec.condition_cap = cap;
        }
        let session = Session::new(id, ds.id.clone(), ds.df.clone(), models, spec)?;
        let created = SessionCreated {
            session: session.info(),
            section: session.section().clone(),
            conditions: session.conditions()?,
        };
        st.add_session(session);
        Ok(created)
    })
    .await?;
    Ok((StatusCode::CREATED, Json(created)))
}

async fn get_session(State(store): State<AppState>, Path(id): Path<String>) -> ApiResult<Json<SessionInfo>> {
    Ok(Json(store.session(&id)?.state.read().info()))
}

async fn get_section(State(store): State<AppState>, Path(id): Path<String>) -> ApiResult<Json<SectionPayload>> {
    Ok(Json(store.session(&id)?.state.read().section().clone()))
}

async fn get_conditions(State(store): State<AppState>, Path(id): Path<String>) -> ApiResult<Json<ConditionPayload>> {
    let slot = store.session(&id)?;
    blocking(move || Ok(Json(slot.state.read().conditions()?))).await
}

async fn get_log(State(store): State<AppState>, Path(id): Path<String>) -> ApiResult<Json<Vec<Mutation>>> {
    Ok(Json(store.session(&id)?.state.read().log().to_vec()))
}

/// Applies one mutation: queued behind other writers, computed on a copy,
/// committed atomically and pushed to event subscribers.
pub async fn apply_mutation(slot: Arc<SessionSlot>, m: Mutation) -> ApiResult<Update> {
    let _writer = slot.writer.lock().await;
    let mut next = slot.state.read().clone();
    let cancel = CancelToken::new();
    *slot.cancel.lock() = cancel.clone();
    let events = slot.events.clone();
    let (next, update) = blocking(move || {
        let progress = |f: f64| {
            let _ = events.send(Event::Progress(f));
        };
        let update = next.apply_with(m, &cancel, Some(&progress))?;
        Ok((next, update))
    })
    .await?;
    *slot.state.write() = next;
    if let Ok(text) = serde_json::to_string(&update) {
        let _ = slot.events.send(Event::Update(Arc::new(text)));
    }
    Ok(update)
}

async fn mutate_session(State(store): State<AppState>, Path(id): Path<String>, body: Bytes) -> ApiResult<Json<Update>> {
    let m: Mutation = parse_json(&body)?;
    let slot = store.session(&id)?;
    Ok(Json(apply_mutation(slot, m).await?))
}

async fn start_tour(State(store): State<AppState>, Path(id): Path<String>, body: Bytes) -> ApiResult<Json<Tour>> {
    let req: TourRequest = parse_json(&body)?;
    let slot = store.session(&id)?;
    slot.stop_player();
    let update = apply_mutation(slot, Mutation::StartTour(req)).await?;
    update.tour.map(Json).ok_or_else(|| ApiError::Internal("tour missing from update".into()))
}

async fn cancel_tour(State(store): State<AppState>, Path(id): Path<String>) -> ApiResult<StatusCode> {
    store.session(&id)?.cancel.lock().cancel();
    Ok(StatusCode::ACCEPTED)
}

#[derive(Debug, Deserialize)]
#[serde(rename_all = "camelCase")]
struct PlayRequest {
    #[serde(default = "default_interval")]
    interval_ms: u64,
    #[serde(default)]
    from: usize,
}

fn default_interval() -> u64 {
    1000
}

/// Steps through the active tour on a timer; each stop is pushed as an
/// `update` event, then a `stopped` event.
async fn play_tour(State(store): State<AppState>, Path(id): Path<String>, body: Bytes) -> ApiResult<impl IntoResponse> {
    let req: PlayRequest = if body.is_empty() { PlayRequest { interval_ms: default_interval(), from: 0 } } else { parse_json(&body)? };
    let slot = store.session(&id)?;
    let len = {
        let s = slot.state.read();
        let tour = s.tour().ok_or(Error::NoTour)?;
        tour.interpolated.as_ref().map_or(tour.len(), Vec::len)
    };
    if req.from >= len {
        return Err(Error::StepOutOfRange { step: req.from, len }.into());
    }
    slot.stop_player();
    let task_slot = slot.clone();
    let handle = tokio::spawn(async move {
        let mut last = None;
        for step in req.from..len {
            if apply_mutation(task_slot.clone(), Mutation::TourStep { step }).await.is_err() {
                break;
            }
            last = Some(step);
            if step + 1 < len {
                tokio::time::sleep(Duration::from_millis(req.interval_ms)).await;
            }
        }
        let _ = task_slot.events.send(Event::PlayStopped { step: last });
    });
    *slot.player.lock() = Some(handle.abort_handle());
    Ok((StatusCode::ACCEPTED, Json(json!({ "steps": len - req.from, "intervalMs": req.interval_ms }))))
}

async fn pause_tour(State(store): State<AppState>, Path(id): Path<String>) -> ApiResult<StatusCode> {
    let slot = store.session(&id)?;
    slot.stop_player();
    let step = slot.state.read().step();
    let _ = slot.events.send(Event::PlayStopped { step });
    Ok(StatusCode::ACCEPTED)
}

fn sse_event(e: Event) -> SseEvent {
    match e {
        Event::Update(text) => SseEvent::default().event("update").data(text.as_str()),
        Event::Progress(f) => SseEvent::default().event("progress").data(json!({ "fraction": f }).to_string()),
        Event::PlayStopped { step } => SseEvent::default().event("stopped").data(json!({ "step": step }).to_string()),
    }
}

async fn events(
    State(store): State<AppState>,
    Path(id): Path<String>,
) -> ApiResult<Sse<impl Stream<Item = Result<SseEvent, Infallible>>>> {
    let rx = store.session(&id)?.events.subscribe();
    let stream = futures::stream::unfold(rx, |mut rx| async move {
        loop {
            match rx.recv().await {
                Ok(e) => return Some((Ok(sse_event(e)), rx)),
                Err(broadcast::error::RecvError::Lagged(_)) => continue,
                Err(broadcast::error::RecvError::Closed) => return None,
            }
        }
    });
    Ok(Sse::new(stream).keep_alive(KeepAlive::default()))
}

#[derive(Debug, Deserialize)]
struct ExportQuery {
    #[serde(default)]
    format: Option<String>,
}

fn export(session: &Session, format: Option<&str>) -> ApiResult<Response> {
    match format.unwrap_or("json") {
        "csv" => Ok(([(header::CONTENT_TYPE, "text/csv; charset=utf-8")], session.visited_csv()?).into_response()),
        "json" => Ok(Json(session.export_visited()).into_response()),
        other => Err(ApiError::BadRequest(format!("unknown export format `{other}`"))),
    }
}

async fn get_visited(State(store): State<AppState>, Path(id): Path<String>, Query(q): Query<ExportQuery>) -> ApiResult<Response> {
    let slot = store.session(&id)?;
    let s = slot.state.read();
    export(&s, q.format.as_deref())
}

/// Ends the session and returns every visited point.
async fn close_session(State(store): State<AppState>, Path(id): Path<String>, Query(q): Query<ExportQuery>) -> ApiResult<Response> {
    // validate the format before the session is gone
    if let Some(f) = q.format.as_deref().filter(|f| !matches!(*f, "csv" | "json")) {
        return Err(ApiError::BadRequest(format!("unknown export format `{f}`")));
    }
    let slot = store.remove_session(&id)?;
    let _writer = slot.writer.lock().await;
    let s = slot.state.read();
    export(&s, q.format.as_deref())
}
