use std::sync::Arc;

use axum::body::Bytes;
use axum::extract::{Path, Query, State};
use axum::http::{header, StatusCode};
use axum::response::IntoResponse;
use axum::routing::{get, patch, post};
use axum::{Json, Router};
use serde::{Deserialize, Serialize};

use kpa_core::ingest::{load_dataset, read_dataset};
use kpa_core::pipeline::AnalysisResult;
use kpa_core::{AnalysisConfig, Domain, Stance};

use crate::error::ApiError;
use crate::jobs::{draft_key_points, AppState};
use crate::store::{JobRecord, JobStatus, Revision};

type Shared = Arc<AppState>;

pub fn router(state: Shared) -> Router {
    Router::new()
        .route("/v1/jobs", post(create_job).get(list_jobs))
        .route("/v1/jobs/{id}", get(get_job))
        .route("/v1/jobs/{id}/versions/{version}", get(get_version))
        .route("/v1/jobs/{id}/versions/{version}/keypoints", get(get_key_points))
        .route("/v1/jobs/{id}/versions/{version}/keypoints/{kp}/comments", get(drilldown))
        .route("/v1/jobs/{id}/keypoints", post(add_key_point))
        .route("/v1/jobs/{id}/keypoints/{kp}", patch(revise_key_point))
        .route("/v1/jobs/{id}/rematch", post(rematch))
        .with_state(state)
}

/// Body of `POST /v1/jobs`. The dataset is either inline `comments` (the
/// JSONL record shape as JSON objects) or a `dataset_path` readable by the
/// server. `config` is TOML text in the config file format.
#[derive(Debug, Default, Serialize, Deserialize)]
pub struct CreateJob {
    #[serde(default)]
    pub name: Option<String>,
    #[serde(default)]
    pub domain: Option<Domain>,
    #[serde(default)]
    pub comments: Option<Vec<serde_json::Value>>,
    #[serde(default)]
    pub dataset_path: Option<String>,
    #[serde(default)]
    pub config: Option<String>,
}

#[derive(Debug, Serialize, Deserialize)]
pub struct JobCreated {
    pub job_id: String,
}

#[derive(Debug, Serialize, Deserialize)]
pub struct JobView {
    pub id: String,
    pub dataset: String,
    pub status: JobStatus,
    pub versions: usize,
    pub pending_revisions: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KeyPointRow {
    pub id: String,
    pub text: String,
    pub topic: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub stance: Option<Stance>,
    pub count: usize,
    pub selection_count: usize,
    pub prevalence: f64,
    pub percentage: i64,
}

#[derive(Debug, Serialize, Deserialize)]
pub struct KeyPointList {
    pub job_id: String,
    pub version: usize,
    pub key_points: Vec<KeyPointRow>,
    pub unmatched: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CommentRow {
    pub id: String,
    pub text: String,
    pub score: f64,
}

#[derive(Debug, Serialize, Deserialize)]
pub struct CommentPage {
    pub key_point_id: String,
    pub version: usize,
    pub page: usize,
    pub size: usize,
    pub total: usize,
    pub items: Vec<CommentRow>,
}

#[derive(Debug, Deserialize)]
pub struct PageQuery {
    page: Option<usize>,
    size: Option<usize>,
}

#[derive(Debug, Default, Serialize, Deserialize)]
pub struct ReviseBody {
    #[serde(default)]
    pub text: Option<String>,
    #[serde(default)]
    pub deleted: bool,
}

#[derive(Debug, Serialize, Deserialize)]
pub struct AddBody {
    pub text: String,
    pub topic: String,
    #[serde(default)]
    pub stance: Option<Stance>,
}

#[derive(Debug, Serialize, Deserialize)]
pub struct RevisionAccepted {
    pub key_point_id: String,
    pub revision: usize,
}

#[derive(Debug, Serialize, Deserialize)]
pub struct VersionCreated {
    pub version: usize,
}

const MAX_PAGE_SIZE: usize = 1000;

fn parse_body<T: for<'de> Deserialize<'de>>(body: &Bytes) -> Result<T, ApiError> {
    serde_json::from_slice(body).map_err(|e| ApiError::bad_request(format!("malformed body: {e}")))
}

async fn blocking<T: Send + 'static>(f: impl FnOnce() -> Result<T, ApiError> + Send + 'static) -> Result<T, ApiError> {
    tokio::task::spawn_blocking(f)
        .await
        .map_err(|e| ApiError::internal(format!("task failed: {e}")))?
}

async fn create_job(State(state): State<Shared>, body: Bytes) -> Result<impl IntoResponse, ApiError> {
    let req: CreateJob = parse_body(&body)?;
    let worker = state.clone();
    let record = blocking(move || {
        let config = AnalysisConfig::from_toml_str(req.config.as_deref().unwrap_or(""), req.domain)
            .map_err(|e| ApiError::bad_request(e.to_string()))?;
        let mut dataset = match (req.comments, req.dataset_path) {
            (Some(records), None) => {
                let mut jsonl = String::new();
                for r in records {
                    jsonl.push_str(&r.to_string());
                    jsonl.push('\n');
                }
                read_dataset(jsonl.as_bytes(), "upload", config.domain)
            }
            (None, Some(path)) => load_dataset(path, config.domain),
            _ => return Err(ApiError::bad_request("give exactly one of comments or dataset_path")),
        }
        .map_err(|e| ApiError::bad_request(e.to_string()))?;
        if dataset.comments.is_empty() {
            return Err(ApiError::bad_request("no comments"));
        }
        if let Some(name) = req.name {
            dataset.name = name;
        }
        Ok(worker.store.create(&dataset, &config)?)
    })
    .await?;
    state.schedule(record.id.clone());
    Ok((StatusCode::ACCEPTED, Json(JobCreated { job_id: record.id })))
}

fn view(state: &AppState, record: JobRecord) -> Result<JobView, ApiError> {
    let pending = state.store.pending(&record.id)?.len();
    Ok(JobView {
        id: record.id,
        dataset: record.dataset,
        status: record.status,
        versions: record.versions,
        pending_revisions: pending,
        error: record.error,
    })
}

async fn list_jobs(State(state): State<Shared>) -> Result<Json<Vec<JobView>>, ApiError> {
    let records = state.store.list()?;
    let views = records
        .into_iter()
        .map(|r| view(&state, r))
        .collect::<Result<Vec<_>, _>>()?;
    Ok(Json(views))
}

async fn get_job(State(state): State<Shared>, Path(id): Path<String>) -> Result<Json<JobView>, ApiError> {
    let record = state.store.get(&id)?;
    Ok(Json(view(&state, record)?))
}

fn ready(state: &AppState, id: &str) -> Result<JobRecord, ApiError> {
    let record = state.store.get(id)?;
    match record.status {
        JobStatus::Done => Ok(record),
        JobStatus::Failed => Err(ApiError::conflict(
            "failed",
            format!("job failed: {}", record.error.as_deref().unwrap_or("unknown error")),
        )),
        _ => Err(ApiError::conflict("not_ready", "not ready")),
    }
}

fn load_version(state: &AppState, id: &str, version: usize) -> Result<AnalysisResult, ApiError> {
    ready(state, id)?;
    state
        .store
        .version(id, version)?
        .ok_or_else(|| ApiError::not_found(format!("job {id} has no version {version}")))
}

/// The stored version document, byte for byte.
async fn get_version(
    State(state): State<Shared>,
    Path((id, version)): Path<(String, usize)>,
) -> Result<impl IntoResponse, ApiError> {
    ready(&state, &id)?;
    let bytes = state
        .store
        .version_bytes(&id, version)?
        .ok_or_else(|| ApiError::not_found(format!("job {id} has no version {version}")))?;
    Ok(([(header::CONTENT_TYPE, "application/json")], bytes))
}

async fn get_key_points(
    State(state): State<Shared>,
    Path((id, version)): Path<(String, usize)>,
) -> Result<Json<KeyPointList>, ApiError> {
    let result = load_version(&state, &id, version)?;
    let mut key_points = Vec::new();
    let mut unmatched = Vec::new();
    for unit in &result.units {
        for kp in &unit.key_points {
            key_points.push(KeyPointRow {
                id: kp.key_point.id.clone(),
                text: kp.key_point.text.clone(),
                topic: unit.topic.clone(),
                stance: unit.stance,
                count: kp.matched.len(),
                selection_count: kp.selection_count,
                prevalence: kp.prevalence,
                percentage: (kp.prevalence * 100.0).round() as i64,
            });
        }
        unmatched.extend(unit.unmatched.iter().cloned());
    }
    Ok(Json(KeyPointList {
        job_id: id,
        version,
        key_points,
        unmatched,
    }))
}

async fn drilldown(
    State(state): State<Shared>,
    Path((id, version, kp)): Path<(String, usize, String)>,
    Query(q): Query<PageQuery>,
) -> Result<Json<CommentPage>, ApiError> {
    let page = q.page.unwrap_or(1);
    let size = q.size.unwrap_or(20);
    if page == 0 || size == 0 || size > MAX_PAGE_SIZE {
        return Err(ApiError::bad_request(format!(
            "page must be at least 1 and size between 1 and {MAX_PAGE_SIZE}"
        )));
    }
    let result = load_version(&state, &id, version)?;
    let found = result
        .units
        .iter()
        .flat_map(|u| &u.key_points)
        .find(|k| k.key_point.id == kp)
        .ok_or_else(|| ApiError::not_found(format!("key point {kp:?} not in version {version}")))?;
    let items = found
        .matched
        .iter()
        .skip((page - 1).saturating_mul(size))
        .take(size)
        .map(|m| CommentRow {
            id: m.id.clone(),
            text: m.text.clone(),
            score: m.score,
        })
        .collect();
    Ok(Json(CommentPage {
        key_point_id: kp,
        version,
        page,
        size,
        total: found.matched.len(),
        items,
    }))
}

fn latest(state: &AppState, id: &str) -> Result<AnalysisResult, ApiError> {
    let record = ready(state, id)?;
    state
        .store
        .version(id, record.versions - 1)?
        .ok_or_else(|| ApiError::internal("latest version missing"))
}

async fn revise_key_point(
    State(state): State<Shared>,
    Path((id, kp)): Path<(String, String)>,
    body: Bytes,
) -> Result<impl IntoResponse, ApiError> {
    let req: ReviseBody = parse_body(&body)?;
    let revision = match (req.deleted, req.text) {
        (true, None) => Revision::Delete {
            key_point_id: kp.clone(),
        },
        (false, Some(text)) if !text.trim().is_empty() => Revision::Rename {
            key_point_id: kp.clone(),
            text: text.trim().to_string(),
        },
        (false, Some(_)) => return Err(ApiError::bad_request("key point text is empty")),
        _ => return Err(ApiError::bad_request("give either a non-empty text or deleted: true")),
    };
    let runtime = state.runtime(&id);
    let _guard = runtime.lock.lock().await;
    let latest = latest(&state, &id)?;
    let mut pending = state.store.pending(&id)?;
    if !draft_key_points(&latest, &pending).contains(&kp) {
        return Err(ApiError::not_found(format!("key point {kp:?} not found")));
    }
    pending.push(revision);
    state.store.set_pending(&id, &pending)?;
    Ok((
        StatusCode::ACCEPTED,
        Json(RevisionAccepted {
            key_point_id: kp,
            revision: pending.len(),
        }),
    ))
}

async fn add_key_point(
    State(state): State<Shared>,
    Path(id): Path<String>,
    body: Bytes,
) -> Result<impl IntoResponse, ApiError> {
    let req: AddBody = parse_body(&body)?;
    let text = req.text.trim().to_string();
    if text.is_empty() {
        return Err(ApiError::bad_request("key point text is empty"));
    }
    let runtime = state.runtime(&id);
    let _guard = runtime.lock.lock().await;
    let latest = latest(&state, &id)?;
    let stance = if latest.config.per_stance { req.stance } else { None };
    if latest.unit(&req.topic, stance).is_none() {
        return Err(ApiError::bad_request(format!(
            "no analysis unit for topic {:?} and stance {:?}",
            req.topic, stance
        )));
    }
    let key_point_id = state.store.next_key_point_id(&id)?;
    let mut pending = state.store.pending(&id)?;
    pending.push(Revision::Add {
        key_point_id: key_point_id.clone(),
        text,
        topic: req.topic,
        stance,
    });
    state.store.set_pending(&id, &pending)?;
    Ok((
        StatusCode::ACCEPTED,
        Json(RevisionAccepted {
            key_point_id,
            revision: pending.len(),
        }),
    ))
}

async fn rematch(State(state): State<Shared>, Path(id): Path<String>) -> Result<Json<VersionCreated>, ApiError> {
    let runtime = state.runtime(&id);
    let _guard = runtime.lock.lock().await;
    ready(&state, &id)?;
    let worker = state.clone();
    let version = blocking(move || worker.rematch_blocking(&id)).await?;
    Ok(Json(VersionCreated { version }))
}
