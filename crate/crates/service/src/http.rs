//! The JSON API behind the explorer.
//!
//! Every payload carries `"schema_version": 1`. Variant lists that are not cached
//! yet are computed on a blocking worker; the request waits up to
//! [`ServiceConfig::sync_wait`] and otherwise answers `202` with a job to poll at
//! `/jobs/{id}`. Once the job is done the original request answers from the cache.

use std::collections::HashMap;
use std::net::SocketAddr;
use std::path::PathBuf;
use std::sync::{Arc, Mutex};
use std::time::Duration;

use axum::body::Bytes;
use axum::extract::{DefaultBodyLimit, Multipart, Path, Query, State};
use axum::http::{header, StatusCode};
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post, put};
use axum::{Json, Router};
use ordlog::export::{write_sequential_csv, write_sequential_xes, SCHEMA_VERSION};
use ordlog::ingest::{parse_edge_list, ExplicitOrderSource};
use ordlog::preprocess::apply;
use ordlog::sequentialize::k_sequentialize;
use ordlog::{check_consistency_scoped, ConsistencyScope, Error, Granularity, SamplerConfig, Tiebreaker};
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};
use tokio::sync::watch;

use crate::input::ConfigOverlay;
use crate::store::{hex_digest, Session, Store, Variants, NO_TIEBREAKER};
use crate::summary::LogSummary;

pub const DEFAULT_GRANULARITY: Granularity = Granularity::Hour;
pub const DEFAULT_PAGE_SIZE: usize = 50;
pub const MAX_PAGE_SIZE: usize = 1000;
const MAX_UPLOAD_BYTES: usize = 1 << 30;

#[derive(Clone, Debug)]
pub struct ServiceConfig {
    pub data_dir: Option<PathBuf>,
    /// How long a request waits for a fresh computation before answering 202.
    pub sync_wait: Duration,
}

impl Default for ServiceConfig {
    fn default() -> Self {
        Self {
            data_dir: None,
            sync_wait: Duration::from_secs(2),
        }
    }
}

impl ServiceConfig {
    /// Reads `ORDLOG_DATA_DIR`.
    pub fn from_env() -> Self {
        Self {
            data_dir: std::env::var_os("ORDLOG_DATA_DIR").map(PathBuf::from),
            ..Self::default()
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
#[serde(tag = "status", rename_all = "snake_case")]
pub enum JobStatus {
    Running,
    Done,
    Failed { message: String },
}

struct Job {
    status: watch::Sender<JobStatus>,
    result: String,
}

struct Inner {
    store: Store,
    jobs: Mutex<HashMap<String, Job>>,
    sync_wait: Duration,
}

#[derive(Clone)]
pub struct AppState(Arc<Inner>);

impl AppState {
    pub fn new(cfg: ServiceConfig) -> Self {
        Self(Arc::new(Inner {
            store: Store::new(cfg.data_dir),
            jobs: Mutex::default(),
            sync_wait: cfg.sync_wait,
        }))
    }

    /// Starts `work` under `id` unless a job with that id exists, then waits for it
    /// up to the configured time.
    async fn run_job<F>(&self, id: &str, result: String, work: F) -> JobStatus
    where
        F: FnOnce() + Send + 'static,
    {
        let mut rx = {
            let mut jobs = self.0.jobs.lock().unwrap();
            match jobs.get(id) {
                Some(job) => job.status.subscribe(),
                None => {
                    let (tx, rx) = watch::channel(JobStatus::Running);
                    jobs.insert(id.to_string(), Job { status: tx, result });
                    let state = self.clone();
                    let id = id.to_string();
                    tokio::spawn(async move {
                        let status = match tokio::task::spawn_blocking(work).await {
                            Ok(()) => JobStatus::Done,
                            Err(e) => JobStatus::Failed {
                                message: format!("computation failed: {e}"),
                            },
                        };
                        if let Some(job) = state.0.jobs.lock().unwrap().get(&id) {
                            job.status.send_replace(status);
                        }
                    });
                    rx
                }
            }
        };
        let _ = tokio::time::timeout(self.0.sync_wait, rx.wait_for(|s| *s != JobStatus::Running)).await;
        let status = rx.borrow().clone();
        status
    }
}

pub fn router(cfg: ServiceConfig) -> Router {
    Router::new()
        .route("/logs", post(upload))
        .route("/logs/{id}", get(summary))
        .route("/logs/{id}/consistency", get(consistency))
        .route("/logs/{id}/variants", get(variants))
        .route("/logs/{id}/variants/{key}", get(variant_detail))
        .route("/logs/{id}/tiebreaker", put(put_tiebreaker))
        .route("/logs/{id}/sequentialize", post(sequentialize))
        .route("/logs/{id}/granularities", get(granularities))
        .route("/jobs/{id}", get(job))
        .layer(DefaultBodyLimit::max(MAX_UPLOAD_BYTES))
        .with_state(AppState::new(cfg))
}

pub async fn serve(addr: SocketAddr, cfg: ServiceConfig) -> std::io::Result<()> {
    let listener = tokio::net::TcpListener::bind(addr).await?;
    eprintln!("listening on http://{}", listener.local_addr()?);
    axum::serve(listener, router(cfg)).await
}

// ----- errors

#[derive(Debug)]
pub struct ApiError {
    status: StatusCode,
    kind: &'static str,
    message: String,
    details: Option<(&'static str, Value)>,
}

impl ApiError {
    fn new(status: StatusCode, kind: &'static str, message: impl Into<String>) -> Self {
        Self {
            status,
            kind,
            message: message.into(),
            details: None,
        }
    }

    fn bad_request(message: impl Into<String>) -> Self {
        Self::new(StatusCode::BAD_REQUEST, "bad_request", message)
    }

    fn not_found(kind: &'static str, message: impl Into<String>) -> Self {
        Self::new(StatusCode::NOT_FOUND, kind, message)
    }

    fn internal(message: impl Into<String>) -> Self {
        Self::new(StatusCode::INTERNAL_SERVER_ERROR, "internal", message)
    }
}

impl From<&Error> for ApiError {
    fn from(e: &Error) -> Self {
        let (status, kind) = match e {
            Error::Parse { .. } => (StatusCode::BAD_REQUEST, "parse_error"),
            Error::Timestamp { .. } => (StatusCode::BAD_REQUEST, "timestamp_error"),
            Error::CyclicOrder { .. } => (StatusCode::BAD_REQUEST, "cyclic_order"),
            Error::DuplicateEventId(_) => (StatusCode::BAD_REQUEST, "duplicate_event"),
            Error::UnknownEvent(_) | Error::EdgeOutOfRange(..) => (StatusCode::BAD_REQUEST, "unknown_event"),
            Error::InvalidTiebreaker(_) => (StatusCode::BAD_REQUEST, "invalid_tiebreaker"),
            Error::InvalidConfig(_) => (StatusCode::BAD_REQUEST, "invalid_config"),
            Error::Order(_) => (StatusCode::BAD_REQUEST, "order_error"),
            Error::UnknownCase(_) => (StatusCode::NOT_FOUND, "unknown_case"),
            Error::Inconsistent(_) => (StatusCode::UNPROCESSABLE_ENTITY, "inconsistent_log"),
            Error::TiebreakerConflict(_) => (StatusCode::CONFLICT, "tiebreaker_conflict"),
            Error::ResourceLimit { .. } => (StatusCode::INSUFFICIENT_STORAGE, "resource_limit"),
            Error::Io(_) => (StatusCode::INTERNAL_SERVER_ERROR, "io_error"),
        };
        let details = match e {
            Error::Inconsistent(report) => Some(("report", json!(report))),
            Error::TiebreakerConflict(c) => Some(("conflicts", json!(c))),
            _ => None,
        };
        Self {
            status,
            kind,
            message: e.to_string(),
            details,
        }
    }
}

impl From<Error> for ApiError {
    fn from(e: Error) -> Self {
        Self::from(&e)
    }
}

impl IntoResponse for ApiError {
    fn into_response(self) -> Response {
        let mut body = json!({
            "schema_version": SCHEMA_VERSION,
            "error": { "kind": self.kind, "message": self.message },
        });
        if let Some((k, v)) = self.details {
            body[k] = v;
        }
        (self.status, Json(body)).into_response()
    }
}

type ApiResult<T = Response> = Result<T, ApiError>;

/// `value` (an object) with `schema_version` added.
fn versioned(value: impl Serialize) -> Json<Value> {
    let mut v = serde_json::to_value(value).expect("payload serializes");
    v["schema_version"] = json!(SCHEMA_VERSION);
    Json(v)
}

async fn blocking<T, F>(f: F) -> ApiResult<T>
where
    F: FnOnce() -> ApiResult<T> + Send + 'static,
    T: Send + 'static,
{
    tokio::task::spawn_blocking(f)
        .await
        .map_err(|e| ApiError::internal(format!("worker failed: {e}")))?
}

// ----- parameters

fn session(state: &AppState, id: &str) -> ApiResult<Arc<Session>> {
    state
        .0
        .store
        .get(id)
        .ok_or_else(|| ApiError::not_found("unknown_log", format!("no log with id {id:?}")))
}

fn granularity(raw: Option<&str>) -> ApiResult<Granularity> {
    match raw {
        None | Some("") => Ok(DEFAULT_GRANULARITY),
        Some(s) => s.parse().map_err(|e| ApiError::bad_request(format!("{e}"))),
    }
}

fn tiebreaker(s: &Session, raw: Option<&str>) -> ApiResult<(String, Arc<Tiebreaker>)> {
    let id = raw.filter(|s| !s.is_empty()).unwrap_or(NO_TIEBREAKER);
    let tb = s
        .tiebreaker(id)
        .ok_or_else(|| ApiError::not_found("unknown_tiebreaker", format!("no tiebreaker with id {id:?}")))?;
    Ok((id.to_string(), tb))
}

#[derive(Debug, Default, Deserialize)]
struct ViewQuery {
    granularity: Option<String>,
    tiebreaker_id: Option<String>,
    page: Option<usize>,
    per_page: Option<usize>,
}

struct View {
    session: Arc<Session>,
    granularity: Granularity,
    tiebreaker_id: String,
    tiebreaker: Arc<Tiebreaker>,
}

impl View {
    fn resolve(state: &AppState, id: &str, q: &ViewQuery) -> ApiResult<Self> {
        let session = session(state, id)?;
        let granularity = granularity(q.granularity.as_deref())?;
        let (tiebreaker_id, tiebreaker) = tiebreaker(&session, q.tiebreaker_id.as_deref())?;
        Ok(Self {
            session,
            granularity,
            tiebreaker_id,
            tiebreaker,
        })
    }

    fn query_string(&self) -> String {
        format!("granularity={}&tiebreaker_id={}", self.granularity, self.tiebreaker_id)
    }
}

enum Pending {
    Ready(Variants),
    Running(Response),
}

fn accepted(job_id: &str, result: &str) -> Response {
    let body = json!({
        "schema_version": SCHEMA_VERSION,
        "job_id": job_id,
        "status": "running",
        "poll": format!("/jobs/{job_id}"),
        "result": result,
    });
    (StatusCode::ACCEPTED, [(header::LOCATION, format!("/jobs/{job_id}"))], Json(body)).into_response()
}

async fn ensure_variants(state: &AppState, view: &View) -> ApiResult<Pending> {
    let s = &view.session;
    let lookup = |s: &Session| {
        s.cached_variants(view.granularity, &view.tiebreaker_id)
            .map(|o| o.map_err(|e| ApiError::from(e.as_ref())))
    };
    if let Some(o) = lookup(s) {
        return o.map(Pending::Ready);
    }
    let job_id = hex_digest(&[
        b"variants",
        s.id.as_bytes(),
        view.granularity.as_str().as_bytes(),
        view.tiebreaker_id.as_bytes(),
    ])[..16]
        .to_string();
    let result = format!("/logs/{}/variants?{}", s.id, view.query_string());
    let (s2, g, tb_id, tb) = (s.clone(), view.granularity, view.tiebreaker_id.clone(), view.tiebreaker.clone());
    let status = state
        .run_job(&job_id, result.clone(), move || {
            let _ = s2.variants_blocking(g, &tb_id, &tb);
        })
        .await;
    match status {
        JobStatus::Done => lookup(s)
            .expect("a finished job has published its result")
            .map(Pending::Ready),
        JobStatus::Running => Ok(Pending::Running(accepted(&job_id, &result))),
        JobStatus::Failed { message } => Err(ApiError::internal(message)),
    }
}

// ----- handlers

async fn upload(State(state): State<AppState>, mut form: Multipart) -> ApiResult {
    let (mut file, mut name, mut config, mut edges) = (None, None, None, None);
    let bad = |e: axum::extract::multipart::MultipartError| ApiError::bad_request(e.body_text());
    while let Some(field) = form.next_field().await.map_err(bad)? {
        match field.name() {
            Some("file") => {
                name = field.file_name().map(str::to_string);
                file = Some(field.bytes().await.map_err(bad)?);
            }
            Some("config") => config = Some(field.text().await.map_err(bad)?),
            Some("edges") => edges = Some(field.text().await.map_err(bad)?),
            other => return Err(ApiError::bad_request(format!("unexpected form field {other:?}"))),
        }
    }
    let file = file.ok_or_else(|| ApiError::bad_request("missing form field \"file\""))?;
    let state2 = state.clone();
    let session = blocking(move || {
        let mut overlay = match config {
            Some(text) => ConfigOverlay::from_json(&text)?,
            None => ConfigOverlay::default(),
        };
        if let Some(text) = edges {
            overlay.explicit_order = Some(ExplicitOrderSource::EdgeList(parse_edge_list(text.as_bytes())?));
        }
        let cfg = overlay.resolve(&file, name.as_deref())?;
        Ok(state2.0.store.insert(&file, cfg)?)
    })
    .await?;
    let body = json!({
        "schema_version": SCHEMA_VERSION,
        "log_id": session.id,
        "summary": LogSummary::new(&session.log, &session.consistency),
    });
    Ok((StatusCode::CREATED, Json(body)).into_response())
}

async fn summary(State(state): State<AppState>, Path(id): Path<String>) -> ApiResult {
    let s = session(&state, &id)?;
    Ok(Json(json!({
        "schema_version": SCHEMA_VERSION,
        "log_id": s.id,
        "summary": LogSummary::new(&s.log, &s.consistency),
    }))
    .into_response())
}

#[derive(Deserialize)]
struct ScopeQuery {
    scope: Option<String>,
}

async fn consistency(
    State(state): State<AppState>,
    Path(id): Path<String>,
    Query(q): Query<ScopeQuery>,
) -> ApiResult {
    let s = session(&state, &id)?;
    let report = match q.scope.as_deref() {
        None | Some("global") => s.consistency.clone(),
        Some("within_case") => {
            let s = s.clone();
            blocking(move || Ok(check_consistency_scoped(&s.log, ConsistencyScope::WithinCase))).await?
        }
        Some(other) => return Err(ApiError::bad_request(format!("unknown scope {other:?}"))),
    };
    let mut body = versioned(&report);
    body["log_id"] = json!(s.id);
    Ok(body.into_response())
}

async fn variants(
    State(state): State<AppState>,
    Path(id): Path<String>,
    Query(q): Query<ViewQuery>,
) -> ApiResult {
    let view = View::resolve(&state, &id, &q)?;
    let all = match ensure_variants(&state, &view).await? {
        Pending::Ready(v) => v,
        Pending::Running(r) => return Ok(r),
    };
    let per_page = q.per_page.unwrap_or(DEFAULT_PAGE_SIZE);
    if per_page == 0 || per_page > MAX_PAGE_SIZE {
        return Err(ApiError::bad_request(format!("per_page must be in 1..={MAX_PAGE_SIZE}")));
    }
    let page = q.page.unwrap_or(1);
    if page == 0 {
        return Err(ApiError::bad_request("pages count from 1"));
    }
    let start = (page - 1).saturating_mul(per_page).min(all.len());
    let end = (start + per_page).min(all.len());
    Ok(Json(json!({
        "schema_version": SCHEMA_VERSION,
        "log_id": view.session.id,
        "granularity": view.granularity,
        "tiebreaker_id": view.tiebreaker_id,
        "variant_count": all.len(),
        "case_count": view.session.log.case_count(),
        "page": page,
        "per_page": per_page,
        "pages": all.len().div_ceil(per_page),
        "variants": &all[start..end],
    }))
    .into_response())
}

async fn variant_detail(
    State(state): State<AppState>,
    Path((id, key)): Path<(String, String)>,
    Query(q): Query<ViewQuery>,
) -> ApiResult {
    let view = View::resolve(&state, &id, &q)?;
    let all = match ensure_variants(&state, &view).await? {
        Pending::Ready(v) => v,
        Pending::Running(r) => return Ok(r),
    };
    let (rank, variant) = all
        .iter()
        .enumerate()
        .find(|(_, v)| v.canonical_key == key)
        .ok_or_else(|| ApiError::not_found("unknown_variant", format!("no variant with key {key:?} at this view")))?;
    Ok(Json(json!({
        "schema_version": SCHEMA_VERSION,
        "log_id": view.session.id,
        "granularity": view.granularity,
        "tiebreaker_id": view.tiebreaker_id,
        "rank": rank + 1,
        "variant": variant,
    }))
    .into_response())
}

async fn put_tiebreaker(
    State(state): State<AppState>,
    Path(id): Path<String>,
    Query(q): Query<ViewQuery>,
    body: String,
) -> ApiResult {
    let s = session(&state, &id)?;
    let g = granularity(q.granularity.as_deref())?;
    let tb = Tiebreaker::parse(&body)?;
    let edges = tb.edges().to_vec();
    let s2 = s.clone();
    let (tb_id, conflicts) = blocking(move || {
        s2.register_tiebreaker(tb, g)
            .map_err(|e| ApiError::from(Error::Io(e)))
    })
    .await?;
    if !conflicts.is_empty() {
        let mut e = ApiError::from(Error::TiebreakerConflict(conflicts));
        e.message = format!("{} at {g} granularity; the tiebreaker was not stored", e.message);
        return Err(e);
    }
    Ok(Json(json!({
        "schema_version": SCHEMA_VERSION,
        "log_id": s.id,
        "tiebreaker_id": tb_id,
        "granularity": g,
        "valid": true,
        "edges": edges,
    }))
    .into_response())
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct SequentializeRequest {
    k: usize,
    #[serde(default)]
    seed: u64,
    #[serde(default)]
    format: ExportFormat,
    /// Without a granularity the original timestamps are used.
    granularity: Option<String>,
    tiebreaker_id: Option<String>,
}

#[derive(Clone, Copy, Default, Deserialize)]
#[serde(rename_all = "lowercase")]
enum ExportFormat {
    #[default]
    Xes,
    Csv,
}

async fn sequentialize(State(state): State<AppState>, Path(id): Path<String>, body: Bytes) -> ApiResult {
    let s = session(&state, &id)?;
    let req: SequentializeRequest =
        serde_json::from_slice(&body).map_err(|e| ApiError::bad_request(format!("request body: {e}")))?;
    let g = req.granularity.as_deref().map(|g| granularity(Some(g))).transpose()?;
    let (tb_id, tb) = tiebreaker(&s, req.tiebreaker_id.as_deref())?;
    let (k, seed, format) = (req.k, req.seed, req.format);
    let s2 = s.clone();
    let bytes = blocking(move || {
        let cfg = SamplerConfig::with_seed(seed);
        let slog = if g.is_none() && tb.is_empty() {
            k_sequentialize(&s2.log, k, &cfg)?
        } else {
            let g = g.unwrap_or(Granularity::Millisecond);
            k_sequentialize(&apply(&s2.log, &s2.aggregator(g), &tb)?, k, &cfg)?
        };
        let mut out = Vec::new();
        match format {
            ExportFormat::Xes => write_sequential_xes(&slog, &mut out)?,
            ExportFormat::Csv => write_sequential_csv(&slog, &mut out)?,
        }
        Ok(out)
    })
    .await?;
    let (mime, ext) = match format {
        ExportFormat::Xes => ("application/xml", "xes"),
        ExportFormat::Csv => ("text/csv", "csv"),
    };
    let level = g.map_or("original", Granularity::as_str);
    let file = format!("{}-{level}-{tb_id}-k{k}-seed{seed}.{ext}", &s.id[..8]);
    Ok((
        [
            (header::CONTENT_TYPE, mime.to_string()),
            (header::CONTENT_DISPOSITION, format!("attachment; filename=\"{file}\"")),
        ],
        bytes,
    )
        .into_response())
}

async fn granularities(
    State(state): State<AppState>,
    Path(id): Path<String>,
    Query(q): Query<ViewQuery>,
) -> ApiResult {
    let s = session(&state, &id)?;
    let (tb_id, tb) = tiebreaker(&s, q.tiebreaker_id.as_deref())?;
    let all_cached = || {
        Granularity::ALL
            .iter()
            .map(|&g| s.cached_variants(g, &tb_id))
            .collect::<Option<Vec<_>>>()
    };
    let outcomes = match all_cached() {
        Some(o) => o,
        None => {
            let job_id = hex_digest(&[b"granularities", s.id.as_bytes(), tb_id.as_bytes()])[..16].to_string();
            let result = format!("/logs/{}/granularities?tiebreaker_id={tb_id}", s.id);
            let (s2, tb_id2) = (s.clone(), tb_id.clone());
            let status = state
                .run_job(&job_id, result.clone(), move || {
                    for g in Granularity::ALL {
                        let _ = s2.variants_blocking(g, &tb_id2, &tb);
                    }
                })
                .await;
            match status {
                JobStatus::Done => all_cached().expect("a finished job has published its results"),
                JobStatus::Running => return Ok(accepted(&job_id, &result)),
                JobStatus::Failed { message } => return Err(ApiError::internal(message)),
            }
        }
    };
    let levels: Vec<Value> = Granularity::ALL
        .iter()
        .zip(outcomes)
        .map(|(g, o)| match o {
            Ok(v) => json!({ "granularity": g, "variant_count": v.len() }),
            Err(e) => {
                let e = ApiError::from(e.as_ref());
                json!({ "granularity": g, "error": { "kind": e.kind, "message": e.message } })
            }
        })
        .collect();
    Ok(Json(json!({
        "schema_version": SCHEMA_VERSION,
        "log_id": s.id,
        "tiebreaker_id": tb_id,
        "levels": levels,
    }))
    .into_response())
}

async fn job(State(state): State<AppState>, Path(id): Path<String>) -> ApiResult {
    let jobs = state.0.jobs.lock().unwrap();
    let job = jobs
        .get(&id)
        .ok_or_else(|| ApiError::not_found("unknown_job", format!("no job with id {id:?}")))?;
    let mut body = versioned(&*job.status.borrow());
    body["job_id"] = json!(id);
    body["result"] = json!(job.result);
    Ok(body.into_response())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn status_per_failure_class() {
        let status = |e: Error| ApiError::from(e).status;
        assert_eq!(status(Error::InvalidConfig("x".into())), StatusCode::BAD_REQUEST);
        assert_eq!(status(Error::UnknownCase("c".into())), StatusCode::NOT_FOUND);
        assert_eq!(status(Error::TiebreakerConflict(vec![])), StatusCode::CONFLICT);
        assert_eq!(
            status(Error::ResourceLimit {
                what: "downsets".into(),
                limit: 1
            }),
            StatusCode::INSUFFICIENT_STORAGE
        );
        let report = ordlog::check_consistency(&ordlog::EventLog::unordered(vec![], "").unwrap());
        assert_eq!(status(Error::Inconsistent(Box::new(report))), StatusCode::UNPROCESSABLE_ENTITY);
    }

    #[test]
    fn error_body_shape() {
        let e = ApiError::from(Error::TiebreakerConflict(vec![]));
        let body = serde_json::to_value(e.details.as_ref().unwrap().1.clone()).unwrap();
        assert_eq!(body, json!([]));
        assert_eq!(e.kind, "tiebreaker_conflict");
    }
}
