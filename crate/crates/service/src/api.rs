//! Routes and handlers.

use std::collections::HashMap;
use std::path::PathBuf;
use std::sync::atomic::{AtomicU64, Ordering};
use std::sync::{Arc, Mutex};

use axum::body::Bytes;
use axum::extract::rejection::{JsonRejection, PathRejection, QueryRejection};
use axum::extract::{Path, Query, State};
use axum::http::{header, HeaderValue, StatusCode};
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post};
use axum::{Json, Router};
use serde::Deserialize;
use serde_json::{json, Value};
use tower_http::cors::{Any, CorsLayer};
use tower_http::services::ServeDir;

use crossing_core::counting::{bucket_members, count_by_bucket};
use crossing_core::document::{deserialize_profile, serialize_space};
use crossing_core::export::to_json;
use crossing_core::{analyze, build_path, AnalyzeOptions, Profile, Rational, ScenarioSpace};

use crate::error::ApiError;
use crate::store::{valid_id, ProfileRepository};

/// Spaces above this size are analyzed in a background job when the
/// constraint forces brute-force counting.
pub const DEFAULT_ASYNC_THRESHOLD: u64 = 2_000_000;

pub const MAX_PAGE: usize = 1000;
const MAX_SESSION_STEPS: usize = 1000;

pub struct ServiceConfig {
    pub space: ScenarioSpace,
    pub store: Arc<dyn ProfileRepository>,
    pub cors_origin: Option<String>,
    pub console_dir: Option<PathBuf>,
    pub async_threshold: u64,
}

impl ServiceConfig {
    pub fn new(space: ScenarioSpace, store: Arc<dyn ProfileRepository>) -> Self {
        ServiceConfig {
            space,
            store,
            cors_origin: None,
            console_dir: None,
            async_threshold: DEFAULT_ASYNC_THRESHOLD,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Hash)]
struct CacheKey {
    fingerprint: String,
    profile_id: String,
    version: u64,
    fast: bool,
    exclude_constrained: bool,
}

enum Job {
    Running,
    Done(Arc<String>),
    Failed(Value),
}

struct Inner {
    space: Arc<ScenarioSpace>,
    space_json: String,
    fingerprint: String,
    store: Arc<dyn ProfileRepository>,
    cache: Mutex<HashMap<CacheKey, Arc<String>>>,
    jobs: Mutex<HashMap<String, Job>>,
    job_by_key: Mutex<HashMap<CacheKey, String>>,
    next_job: AtomicU64,
    async_threshold: u64,
}

#[derive(Clone)]
pub struct AppState {
    inner: Arc<Inner>,
}

impl AppState {
    pub fn new(config: &ServiceConfig) -> Self {
        AppState {
            inner: Arc::new(Inner {
                space_json: serialize_space(&config.space),
                fingerprint: config.space.fingerprint(),
                space: Arc::new(config.space.clone()),
                store: config.store.clone(),
                cache: Mutex::new(HashMap::new()),
                jobs: Mutex::new(HashMap::new()),
                job_by_key: Mutex::new(HashMap::new()),
                next_job: AtomicU64::new(1),
                async_threshold: config.async_threshold,
            }),
        }
    }

    async fn blocking<T, F>(&self, f: F) -> Result<T, ApiError>
    where
        T: Send + 'static,
        F: FnOnce(&Inner) -> Result<T, ApiError> + Send + 'static,
    {
        let inner = self.inner.clone();
        tokio::task::spawn_blocking(move || f(&inner))
            .await
            .map_err(|e| ApiError::internal(e.to_string()))?
    }

    async fn load(&self, id: String) -> Result<Profile, ApiError> {
        if !valid_id(&id) {
            return Err(ApiError::not_found(format!("profile {id:?} not found")));
        }
        self.blocking(move |inner| Ok(inner.store.get(&id)?)).await
    }

    fn evict(&self, id: &str) {
        lock(&self.inner.cache).retain(|k, _| k.profile_id != id);
    }
}

fn lock<T>(m: &Mutex<T>) -> std::sync::MutexGuard<'_, T> {
    m.lock().unwrap_or_else(|e| e.into_inner())
}

pub fn router(config: &ServiceConfig) -> Router {
    let state = AppState::new(config);
    let api = Router::new()
        .route("/api/schema", get(schema))
        .route("/api/profiles", get(list_profiles).post(create_profile))
        .route(
            "/api/profiles/{id}",
            get(get_profile).put(update_profile).delete(delete_profile),
        )
        .route("/api/profiles/{id}/analysis", get(analysis))
        .route("/api/profiles/{id}/buckets/{k}", get(bucket_page))
        .route("/api/profiles/{id}/sessions", post(session))
        .route("/api/jobs/{token}", get(job_status))
        .with_state(state);
    let api = match &config.console_dir {
        Some(dir) => api.fallback_service(ServeDir::new(dir)),
        None => api,
    };
    match config.cors_origin.as_deref().map(HeaderValue::from_str) {
        Some(Ok(origin)) => api.layer(
            CorsLayer::new()
                .allow_origin(origin)
                .allow_methods(Any)
                .allow_headers([header::CONTENT_TYPE]),
        ),
        Some(Err(_)) => {
            tracing::warn!("ignoring unparsable CORS origin");
            api
        }
        None => api,
    }
}

fn json_text(status: StatusCode, text: impl Into<String>) -> Response {
    (status, [(header::CONTENT_TYPE, "application/json")], text.into()).into_response()
}

async fn schema(State(st): State<AppState>) -> Response {
    json_text(StatusCode::OK, st.inner.space_json.clone())
}

async fn list_profiles(State(st): State<AppState>) -> Result<Json<Vec<Profile>>, ApiError> {
    Ok(Json(st.blocking(|inner| Ok(inner.store.list()?)).await?))
}

async fn get_profile(State(st): State<AppState>, Path(id): Path<String>) -> Result<Json<Profile>, ApiError> {
    Ok(Json(st.load(id).await?))
}

/// Parses and validates a profile body against the active space.
fn parse_profile(body: &[u8], space: &ScenarioSpace) -> Result<(Profile, Value), ApiError> {
    let text = std::str::from_utf8(body).map_err(|_| ApiError::unprocessable("body is not UTF-8"))?;
    let profile = match deserialize_profile(text) {
        Ok(p) => p,
        Err(crossing_core::Error::InvalidProfile(_)) => {
            // weight range problems: report them alongside everything else
            let p: Profile = serde_json::from_str(text).map_err(|e| ApiError::unprocessable(e.to_string()))?;
            return Err(ApiError::invalid_document(&p.validate(space)));
        }
        Err(e) => return Err(e.into()),
    };
    let report = profile.validate(space);
    if !report.is_ok() {
        return Err(ApiError::invalid_document(&report));
    }
    let raw: Value = serde_json::from_str(text).map_err(|e| ApiError::unprocessable(e.to_string()))?;
    Ok((profile, raw))
}

async fn create_profile(State(st): State<AppState>, body: Bytes) -> Result<Response, ApiError> {
    let (profile, _) = parse_profile(&body, &st.inner.space)?;
    let created = st.blocking(move |inner| Ok(inner.store.create(profile)?)).await?;
    st.evict(&created.profile_id);
    let location = format!("/api/profiles/{}", created.profile_id);
    Ok((StatusCode::CREATED, [(header::LOCATION, location)], Json(created)).into_response())
}

async fn update_profile(
    State(st): State<AppState>,
    Path(id): Path<String>,
    body: Bytes,
) -> Result<Json<Profile>, ApiError> {
    if !valid_id(&id) {
        return Err(ApiError::not_found(format!("profile {id:?} not found")));
    }
    let (profile, raw) = parse_profile(&body, &st.inner.space)?;
    if profile.profile_id != id {
        return Err(ApiError::unprocessable(format!(
            "document id {:?} does not match {id:?}",
            profile.profile_id
        )));
    }
    if raw.get("version").is_none() {
        return Err(ApiError::unprocessable("version is required for updates"));
    }
    let updated = st.blocking(move |inner| Ok(inner.store.update(profile)?)).await?;
    st.evict(&id);
    Ok(Json(updated))
}

#[derive(Deserialize)]
struct DeleteQuery {
    version: Option<u64>,
}

async fn delete_profile(
    State(st): State<AppState>,
    Path(id): Path<String>,
    query: Result<Query<DeleteQuery>, QueryRejection>,
) -> Result<StatusCode, ApiError> {
    let Query(q) = query.map_err(|e| ApiError::bad_request(e.body_text()))?;
    if !valid_id(&id) {
        return Err(ApiError::not_found(format!("profile {id:?} not found")));
    }
    let key = id.clone();
    st.blocking(move |inner| Ok(inner.store.delete(&key, q.version)?)).await?;
    st.evict(&id);
    Ok(StatusCode::NO_CONTENT)
}

fn yes() -> bool {
    true
}

#[derive(Deserialize)]
struct AnalysisQuery {
    #[serde(default = "yes")]
    fast: bool,
    #[serde(default)]
    exclude_constrained: bool,
}

fn needs_background(space: &ScenarioSpace, profile: &Profile, fast: bool, threshold: u64) -> bool {
    let big = space.total_combinations().map_or(true, |n| n > threshold);
    big && (!fast || profile.constraint.conjunctive_shape(space).is_err())
}

fn run_analysis(space: &ScenarioSpace, profile: &Profile, key: &CacheKey) -> Result<String, ApiError> {
    let options = AnalyzeOptions {
        use_fast_counting: key.fast,
        exclude_constrained: key.exclude_constrained,
    };
    Ok(to_json(&analyze(space, profile, options)?))
}

async fn analysis(
    State(st): State<AppState>,
    Path(id): Path<String>,
    query: Result<Query<AnalysisQuery>, QueryRejection>,
) -> Result<Response, ApiError> {
    let Query(q) = query.map_err(|e| ApiError::bad_request(e.body_text()))?;
    let profile = st.load(id).await?;
    let key = CacheKey {
        fingerprint: st.inner.fingerprint.clone(),
        profile_id: profile.profile_id.clone(),
        version: profile.version,
        fast: q.fast,
        exclude_constrained: q.exclude_constrained,
    };
    if let Some(hit) = lock(&st.inner.cache).get(&key).cloned() {
        return Ok(json_text(StatusCode::OK, hit.as_str()));
    }
    if needs_background(&st.inner.space, &profile, q.fast, st.inner.async_threshold) {
        let token = start_job(&st, profile, key);
        let body = json!({ "status": "in_progress", "job": token });
        let location = format!("/api/jobs/{token}");
        return Ok((StatusCode::ACCEPTED, [(header::LOCATION, location)], Json(body)).into_response());
    }
    let k = key.clone();
    let text = st
        .blocking(move |inner| run_analysis(&inner.space, &profile, &k))
        .await?;
    let text = lock(&st.inner.cache).entry(key).or_insert_with(|| Arc::new(text)).clone();
    Ok(json_text(StatusCode::OK, text.as_str()))
}

fn start_job(st: &AppState, profile: Profile, key: CacheKey) -> String {
    let mut by_key = lock(&st.inner.job_by_key);
    if let Some(token) = by_key.get(&key) {
        if matches!(lock(&st.inner.jobs).get(token), Some(Job::Running)) {
            return token.clone();
        }
    }
    let token = format!("job-{}", st.inner.next_job.fetch_add(1, Ordering::Relaxed));
    lock(&st.inner.jobs).insert(token.clone(), Job::Running);
    by_key.insert(key.clone(), token.clone());
    let inner = st.inner.clone();
    let t = token.clone();
    tokio::task::spawn_blocking(move || {
        let outcome = match run_analysis(&inner.space, &profile, &key) {
            Ok(text) => {
                let text = Arc::new(text);
                lock(&inner.cache).insert(key, text.clone());
                Job::Done(text)
            }
            Err(e) => Job::Failed(e.body),
        };
        lock(&inner.jobs).insert(t, outcome);
    });
    token
}

async fn job_status(State(st): State<AppState>, Path(token): Path<String>) -> Result<Response, ApiError> {
    let jobs = lock(&st.inner.jobs);
    match jobs.get(&token) {
        None => Err(ApiError::not_found(format!("job {token:?} not found"))),
        Some(Job::Running) => Ok(Json(json!({ "status": "in_progress", "job": token })).into_response()),
        Some(Job::Done(text)) => Ok(json_text(
            StatusCode::OK,
            format!(r#"{{"status":"done","job":{},"result":{}}}"#, json!(token), text),
        )),
        Some(Job::Failed(body)) => Ok(Json(json!({ "status": "failed", "job": token, "error": body })).into_response()),
    }
}

fn default_limit() -> usize {
    50
}

#[derive(Deserialize)]
struct PageQuery {
    #[serde(default)]
    offset: usize,
    #[serde(default = "default_limit")]
    limit: usize,
}

async fn bucket_page(
    State(st): State<AppState>,
    path: Result<Path<(String, u32)>, PathRejection>,
    query: Result<Query<PageQuery>, QueryRejection>,
) -> Result<Response, ApiError> {
    let Path((id, k)) = path.map_err(|e| ApiError::bad_request(e.body_text()))?;
    let Query(q) = query.map_err(|e| ApiError::bad_request(e.body_text()))?;
    if q.limit > MAX_PAGE {
        return Err(ApiError::bad_request(format!("limit must be at most {MAX_PAGE}")));
    }
    let profile = st.load(id).await?;
    let body = st
        .blocking(move |inner| {
            let space = &inner.space;
            let counts = count_by_bucket(space, &profile)?;
            let bucket = counts.get(k).ok_or(crossing_core::Error::BucketOutOfRange {
                k,
                k_max: counts.k_max,
            })?;
            let items: Vec<Value> = bucket_members(space, &profile, k, q.offset, q.limit)?
                .into_iter()
                .map(|s| json!({ "labels": space.labels_for(&s), "assignment": s.assignment }))
                .collect();
            Ok(json!({
                "profile": profile.profile_id,
                "k": k,
                "cd": bucket.cd,
                "total": bucket.count_profile,
                "offset": q.offset,
                "limit": q.limit,
                "items": items,
            }))
        })
        .await?;
    Ok(Json(body).into_response())
}

#[derive(Deserialize)]
struct SessionRequest {
    cd_targets: Vec<Rational>,
    per_level: usize,
    #[serde(default)]
    seed: u64,
}

async fn session(
    State(st): State<AppState>,
    Path(id): Path<String>,
    body: Result<Json<SessionRequest>, JsonRejection>,
) -> Result<Response, ApiError> {
    let Json(req) = body.map_err(|e| ApiError::new(e.status(), e.body_text()))?;
    if req.per_level == 0 || req.cd_targets.is_empty() {
        return Err(ApiError::unprocessable("cd_targets and per_level must be nonempty"));
    }
    if req.per_level.saturating_mul(req.cd_targets.len()) > MAX_SESSION_STEPS {
        return Err(ApiError::unprocessable(format!("at most {MAX_SESSION_STEPS} steps per plan")));
    }
    let profile = st.load(id).await?;
    let plan = st
        .blocking(move |inner| Ok(build_path(&inner.space, &profile, &req.cd_targets, req.per_level, req.seed)?))
        .await?;
    Ok(Json(plan).into_response())
}
