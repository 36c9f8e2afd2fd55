//! HTTP/JSON front end for the review store.
//!
//! Reads share a read lock; every write, including merge, takes the single
//! write lock, so merges never interleave with review submissions.

use std::collections::HashMap;
use std::net::SocketAddr;
use std::sync::Arc;

use axum::body::Bytes;
use axum::extract::{Path, Query, State};
use axum::http::StatusCode;
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post};
use axum::{Json, Router};
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};
use sts_core::miner::InstanceStatus;
use sts_core::verifier::{scene_excerpt, MergePolicy, Review, SceneExcerpt, StoreError, Store};
use sts_core::{ScenarioInstance, Scene};
use tokio::sync::RwLock;

pub const DEFAULT_PAGE: usize = 50;
pub const MAX_PAGE: usize = 500;

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct ApiError {
    pub code: String,
    pub message: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub field: Option<String>,
}

impl ApiError {
    fn new(code: &str, message: impl Into<String>, field: Option<String>) -> Self {
        ApiError { code: code.to_string(), message: message.into(), field }
    }

    fn status(&self) -> StatusCode {
        match self.code.as_str() {
            "not_found" => StatusCode::NOT_FOUND,
            "conflict" => StatusCode::CONFLICT,
            "validation" => StatusCode::UNPROCESSABLE_ENTITY,
            "bad_request" => StatusCode::BAD_REQUEST,
            _ => StatusCode::INTERNAL_SERVER_ERROR,
        }
    }
}

impl From<StoreError> for ApiError {
    fn from(e: StoreError) -> Self {
        ApiError::new(e.code(), e.to_string(), e.field().map(str::to_string))
    }
}

impl IntoResponse for ApiError {
    fn into_response(self) -> Response {
        (self.status(), Json(self)).into_response()
    }
}

pub struct AppState {
    pub store: RwLock<Store>,
    /// Scenes by id, for excerpts. Instances whose scene is absent are
    /// served without one.
    pub scenes: HashMap<String, Scene>,
    pub unblind: bool,
}

impl AppState {
    pub fn new(store: Store, scenes: HashMap<String, Scene>, unblind: bool) -> Arc<Self> {
        Arc::new(AppState { store: RwLock::new(store), scenes, unblind })
    }
}

type Shared = Arc<AppState>;

// serde_path_to_error gives the failing field for the error body
fn parse_body<T: DeserializeOwned>(body: &Bytes) -> Result<T, ApiError> {
    let de = &mut serde_json::Deserializer::from_slice(body);
    serde_path_to_error::deserialize(de).map_err(|e| {
        let path = e.path().to_string();
        let field = (path != ".").then_some(path);
        ApiError::new("bad_request", e.into_inner().to_string(), field)
    })
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct SessionRequest {
    reviewer: String,
}

async fn create_session(State(st): State<Shared>, body: Bytes) -> Result<Response, ApiError> {
    let req: SessionRequest = parse_body(&body)?;
    let mut store = st.store.write().await;
    let existed = store.session(req.reviewer.trim()).is_some();
    let session = store.create_session(&req.reviewer)?;
    let code = if existed { StatusCode::OK } else { StatusCode::CREATED };
    Ok((code, Json(session)).into_response())
}

#[derive(Deserialize)]
struct ListQuery {
    status: Option<String>,
    reviewer: Option<String>,
    offset: Option<usize>,
    limit: Option<usize>,
}

fn parse_status(s: &str) -> Result<InstanceStatus, ApiError> {
    serde_json::from_value(serde_json::Value::String(s.to_string()))
        .map_err(|_| ApiError::new("validation", format!("unknown status `{s}`"), Some("status".into())))
}

async fn list_scenarios(State(st): State<Shared>, Query(q): Query<ListQuery>) -> Result<Response, ApiError> {
    let status = q.status.as_deref().filter(|s| !s.is_empty()).map(parse_status).transpose()?;
    let limit = q.limit.unwrap_or(DEFAULT_PAGE);
    if limit == 0 || limit > MAX_PAGE {
        return Err(ApiError::new("validation", format!("limit must be in 1..={MAX_PAGE}"), Some("limit".into())));
    }
    let store = st.store.read().await;
    let reviewer = q.reviewer.as_deref().filter(|s| !s.is_empty());
    Ok(Json(store.list(status, reviewer, q.offset.unwrap_or(0), limit)).into_response())
}

#[derive(Serialize)]
struct ScenarioDetail {
    instance: ScenarioInstance,
    #[serde(skip_serializing_if = "Option::is_none")]
    excerpt: Option<SceneExcerpt>,
    reviews: Vec<Review>,
}

#[derive(Deserialize)]
struct DetailQuery {
    reviewer: Option<String>,
}

async fn get_scenario(
    State(st): State<Shared>,
    Path(id): Path<String>,
    Query(q): Query<DetailQuery>,
) -> Result<Response, ApiError> {
    let store = st.store.read().await;
    let Some(inst) = store.instance(&id) else {
        return Err(StoreError::NotFound { what: "scenario", id }.into());
    };
    // blind review: a reviewer sees only their own verdict
    let reviews = store
        .reviews_for(&id)
        .into_iter()
        .filter(|r| st.unblind || q.reviewer.as_deref() == Some(r.reviewer.as_str()))
        .cloned()
        .collect();
    let excerpt = st.scenes.get(&inst.scene_id).map(|s| scene_excerpt(inst, s));
    Ok(Json(ScenarioDetail { instance: inst.clone(), excerpt, reviews }).into_response())
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct ReviewBody {
    #[serde(default)]
    scenario_id: Option<String>,
    reviewer: String,
    positive: bool,
    #[serde(default)]
    invalid_negatives: Vec<String>,
    #[serde(default)]
    elapsed_ms: u64,
}

async fn submit_review(State(st): State<Shared>, Path(id): Path<String>, body: Bytes) -> Result<Response, ApiError> {
    let b: ReviewBody = parse_body(&body)?;
    if b.scenario_id.as_ref().is_some_and(|s| *s != id) {
        return Err(ApiError::new("validation", "does not match the path", Some("scenario_id".into())));
    }
    let review = Review {
        scenario_id: id,
        reviewer: b.reviewer,
        positive: b.positive,
        invalid_negatives: b.invalid_negatives,
        elapsed_ms: b.elapsed_ms,
    };
    let stored = st.store.write().await.submit_review(review)?;
    Ok(Json(stored).into_response())
}

#[derive(Deserialize, Default)]
#[serde(deny_unknown_fields)]
struct MergeRequest {
    #[serde(default)]
    policy: MergePolicy,
}

async fn merge(State(st): State<Shared>, body: Bytes) -> Result<Response, ApiError> {
    let req: MergeRequest = if body.iter().all(u8::is_ascii_whitespace) { MergeRequest::default() } else { parse_body(&body)? };
    let out = st.store.write().await.merge(&req.policy)?;
    Ok(Json(out).into_response())
}

async fn stats(State(st): State<Shared>) -> Response {
    Json(st.store.read().await.stats()).into_response()
}

async fn fallback() -> ApiError {
    ApiError::new("not_found", "no such route", None)
}

pub fn router(state: Shared) -> Router {
    Router::new()
        .route("/sessions", post(create_session))
        .route("/scenarios", get(list_scenarios))
        .route("/scenarios/{id}", get(get_scenario))
        .route("/scenarios/{id}/review", post(submit_review))
        .route("/merge", post(merge))
        .route("/stats", get(stats))
        .fallback(fallback)
        .with_state(state)
}

/// Serves until ctrl-c.
pub async fn serve(addr: SocketAddr, state: Shared) -> std::io::Result<()> {
    let listener = tokio::net::TcpListener::bind(addr).await?;
    log::info!("listening on {}", listener.local_addr()?);
    axum::serve(listener, router(state))
        .with_graceful_shutdown(async {
            let _ = tokio::signal::ctrl_c().await;
        })
        .await
}
