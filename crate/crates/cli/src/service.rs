//! HTTP service exposing one project file to workshop clients.
//!
//! Every mutation must carry the current revision in `If-Match`; the
//! response's `ETag` holds the next one. Mutations are applied by a single
//! writer and persisted atomically before they become visible.

use std::net::SocketAddr;
use std::path::{Path, PathBuf};
use std::sync::{Arc, Mutex, MutexGuard};
use std::time::{SystemTime, UNIX_EPOCH};

use axum::body::Bytes;
use axum::extract::rejection::JsonRejection;
use axum::extract::State;
use axum::http::{header, HeaderMap, HeaderValue, StatusCode};
use axum::response::{IntoResponse, Response};
use axum::routing::{get, patch, post};
use axum::{Json, Router};
use mfdx_core::io::{parse_project, write_project_file};
use mfdx_core::*;
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ApiError {
    pub status: u16,
    pub code: String,
    pub message: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub details: Option<Value>,
}

impl ApiError {
    pub fn new(status: StatusCode, code: &str, message: impl Into<String>) -> Self {
        ApiError {
            status: status.as_u16(),
            code: code.to_string(),
            message: message.into(),
            details: None,
        }
    }

    pub fn with_details(mut self, details: impl Serialize) -> Self {
        self.details = serde_json::to_value(details).ok();
        self
    }
}

impl IntoResponse for ApiError {
    fn into_response(self) -> Response {
        let status = StatusCode::from_u16(self.status).unwrap_or(StatusCode::INTERNAL_SERVER_ERROR);
        (status, Json(self)).into_response()
    }
}

fn bad_body(e: JsonRejection) -> ApiError {
    ApiError::new(StatusCode::BAD_REQUEST, "malformed_body", e.body_text())
}

fn unprocessable(code: &str, e: impl std::fmt::Display) -> ApiError {
    ApiError::new(StatusCode::UNPROCESSABLE_ENTITY, code, e.to_string())
}

struct Current {
    project: Project,
    revision: u64,
}

pub struct AppState {
    path: PathBuf,
    current: Mutex<Current>,
}

impl AppState {
    /// Loads the project at `path`. Revisions start from the wall clock in
    /// microseconds so tokens keep increasing across restarts.
    pub fn load(path: &Path) -> Result<Arc<Self>, ProjectIoError> {
        let project = read_project_file(path)?;
        let revision = SystemTime::now().duration_since(UNIX_EPOCH).map_or(1, |d| d.as_micros() as u64);
        Ok(Arc::new(AppState {
            path: path.to_path_buf(),
            current: Mutex::new(Current { project, revision }),
        }))
    }

    fn lock(&self) -> MutexGuard<'_, Current> {
        self.current.lock().unwrap_or_else(|e| e.into_inner())
    }

    pub fn revision(&self) -> u64 {
        self.lock().revision
    }

    /// Applies `change` if `expected` is current, persists the result and
    /// bumps the revision.
    fn mutate<T>(
        &self,
        expected: u64,
        change: impl FnOnce(&Project) -> Result<(Project, T), ApiError>,
    ) -> Result<(u64, T), ApiError> {
        let mut cur = self.lock();
        if cur.revision != expected {
            return Err(ApiError::new(
                StatusCode::CONFLICT,
                "revision_conflict",
                format!("revision {expected} is stale; current revision is {}", cur.revision),
            )
            .with_details(json!({ "current_revision": cur.revision })));
        }
        let (next, out) = change(&cur.project)?;
        write_project_file(&self.path, &next).map_err(|e| {
            ApiError::new(StatusCode::INTERNAL_SERVER_ERROR, "storage_error", e.to_string())
        })?;
        cur.project = next;
        cur.revision += 1;
        Ok((cur.revision, out))
    }

    fn snapshot(&self) -> (Project, u64) {
        let cur = self.lock();
        (cur.project.clone(), cur.revision)
    }
}

fn etag(revision: u64) -> HeaderValue {
    HeaderValue::from_str(&format!("\"{revision}\"")).expect("digits are a valid header")
}

fn if_match(headers: &HeaderMap) -> Result<u64, ApiError> {
    let raw = headers
        .get(header::IF_MATCH)
        .ok_or_else(|| ApiError::new(StatusCode::BAD_REQUEST, "missing_revision", "If-Match header with the current revision is required"))?;
    raw.to_str()
        .ok()
        .map(|s| s.trim().trim_start_matches("W/").trim_matches('"'))
        .and_then(|s| s.parse().ok())
        .ok_or_else(|| ApiError::new(StatusCode::BAD_REQUEST, "malformed_revision", "If-Match must hold a revision number"))
}

fn with_etag(revision: u64, body: Value) -> Response {
    let mut res = Json(body).into_response();
    res.headers_mut().insert(header::ETAG, etag(revision));
    res
}

pub fn router(state: Arc<AppState>) -> Router {
    Router::new()
        .route("/api/project", get(get_project).put(put_project))
        .route("/api/msasm/scores", patch(patch_scores))
        .route("/api/msasm/report", get(msasm_report))
        .route("/api/cluster/propose", post(cluster_propose))
        .route("/api/concepts/evaluate", post(concepts_evaluate))
        .route("/api/adcd/issues", get(adcd_issues))
        .fallback(|| async { ApiError::new(StatusCode::NOT_FOUND, "not_found", "no such endpoint") })
        .with_state(state)
}

async fn get_project(State(state): State<Arc<AppState>>) -> Response {
    let (project, revision) = state.snapshot();
    let mut res = (
        [(header::CONTENT_TYPE, HeaderValue::from_static("application/json"))],
        save_project(&project),
    )
        .into_response();
    res.headers_mut().insert(header::ETAG, etag(revision));
    res
}

async fn put_project(State(state): State<Arc<AppState>>, headers: HeaderMap, body: Bytes) -> Result<Response, ApiError> {
    let expected = if_match(&headers)?;
    let incoming = parse_project(&body).map_err(|e| match e {
        ProjectIoError::UnsupportedVersion(_) => ApiError::new(StatusCode::BAD_REQUEST, "unsupported_version", e.to_string()),
        _ => ApiError::new(StatusCode::BAD_REQUEST, "malformed_body", e.to_string()),
    })?;
    let report = validate_project(&incoming);
    if report.has_errors() {
        return Err(ApiError::new(StatusCode::UNPROCESSABLE_ENTITY, "validation_failed", "project failed validation")
            .with_details(&report));
    }
    let (revision, ()) = state.mutate(expected, |_| Ok((incoming, ())))?;
    Ok(with_etag(revision, json!({ "revision": revision, "warnings": report })))
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct ScoreEdit {
    set: ModuleSet,
    criterion: String,
    proposals: Vec<i64>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct ScoresPatch {
    scores: Vec<ScoreEdit>,
}

async fn patch_scores(
    State(state): State<Arc<AppState>>,
    headers: HeaderMap,
    body: Result<Json<ScoresPatch>, JsonRejection>,
) -> Result<Response, ApiError> {
    let expected = if_match(&headers)?;
    let Json(patch) = body.map_err(bad_body)?;
    let (revision, (records, report)) = state.mutate(expected, |project| {
        let mut next = project.clone();
        let mut records = Vec::with_capacity(patch.scores.len());
        for edit in &patch.scores {
            let record = record_score(edit.set.clone(), edit.criterion.clone(), &edit.proposals)
                .map_err(|e| unprocessable("invalid_score", format!("{}/{}: {e}", edit.set, edit.criterion)))?;
            records.push(record.clone());
            next.upsert_msasm(record);
        }
        let validation = validate_project(&next);
        if validation.has_errors() {
            return Err(ApiError::new(StatusCode::UNPROCESSABLE_ENTITY, "validation_failed", "scores failed validation")
                .with_details(&validation));
        }
        let report = next.msasm_report().map_err(|e| unprocessable("msasm_error", e))?;
        Ok((next, (records, report)))
    })?;
    Ok(with_etag(
        revision,
        json!({
            "revision": revision,
            "records": records,
            "aggregates": report.aggregates,
            "bottlenecks": report.bottlenecks,
        }),
    ))
}

async fn msasm_report(State(state): State<Arc<AppState>>) -> Result<Response, ApiError> {
    let (project, revision) = state.snapshot();
    let report = project.msasm_report().map_err(|e| unprocessable("msasm_error", e))?;
    Ok(with_etag(revision, serde_json::to_value(report).expect("report serializes")))
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ClusterRequest {
    pub lambda: Option<f64>,
    pub pair_cost: Option<f64>,
    pub max_blocks: Option<usize>,
    #[serde(default)]
    pub seed: u64,
    /// When given, only this partition is scored; nothing is searched.
    pub partition: Option<Partition>,
}

/// Shared by the CLI and the service so both report identical numbers.
pub fn cluster(project: &Project, req: &ClusterRequest) -> Result<Value, ClusterError> {
    let weights = ObjectiveWeights::new(req.lambda.unwrap_or(project.config.lambda))
        .with_pair_cost(req.pair_cost.unwrap_or(project.config.pair_cost));
    let solutions = project.solution_ids();
    let mim = project.mim_matrix();
    let inter = project.interaction_matrix()?;
    let current = project.current_partition();
    let current_objective = clustering_objective(&current, &solutions, &mim, &inter, weights)?;
    match &req.partition {
        Some(partition) => {
            let objective = clustering_objective(partition, &solutions, &mim, &inter, weights)?;
            Ok(json!({
                "partition": partition,
                "objective": objective,
                "current_objective": current_objective,
                "delta": objective - current_objective,
                "weights": weights,
            }))
        }
        None => {
            let params = SearchParams {
                max_blocks: req.max_blocks.or(project.config.max_blocks),
                seed: req.seed,
            };
            let proposal = propose_modules(&solutions, &mim, &inter, weights, params)?;
            Ok(json!({
                "partition": proposal.partition,
                "objective": proposal.objective,
                "current_objective": current_objective,
                "delta": proposal.objective - current_objective,
                "weights": weights,
                "seed": req.seed,
                "trace": proposal.trace,
            }))
        }
    }
}

async fn cluster_propose(
    State(state): State<Arc<AppState>>,
    body: Result<Json<ClusterRequest>, JsonRejection>,
) -> Result<Json<Value>, ApiError> {
    let Json(req) = body.map_err(bad_body)?;
    let (project, _) = state.snapshot();
    cluster(&project, &req).map(Json).map_err(|e| unprocessable("cluster_error", e))
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct ConceptsRequest {
    #[serde(default)]
    mode: EvaluationMode,
    /// Replaces the project's cells for this evaluation only.
    cells: Option<Value>,
}

async fn concepts_evaluate(
    State(state): State<Arc<AppState>>,
    body: Result<Json<ConceptsRequest>, JsonRejection>,
) -> Result<Json<Value>, ApiError> {
    let Json(req) = body.map_err(bad_body)?;
    let (mut project, _) = state.snapshot();
    if let Some(cells) = req.cells {
        let malformed = |e: serde_json::Error| ApiError::new(StatusCode::BAD_REQUEST, "malformed_body", e.to_string());
        match req.mode {
            EvaluationMode::Pugh => project.matrices.pugh = serde_json::from_value(cells).map_err(malformed)?,
            EvaluationMode::Numeric => project.matrices.numeric = serde_json::from_value(cells).map_err(malformed)?,
        }
    }
    concept_ranking(&project, req.mode).map(Json).map_err(|e| unprocessable("concept_error", e))
}

/// Ranking as JSON; an empty ranking when nothing is evaluated.
pub fn concept_ranking(project: &Project, mode: EvaluationMode) -> Result<Value, ConceptError> {
    Ok(match project.evaluate_concepts(mode)? {
        Some(ranking) => serde_json::to_value(ranking).expect("ranking serializes"),
        None => json!({ "mode": mode, "ranking": [] }),
    })
}

/// Issues and the suggested sequence as JSON.
pub fn adcd_summary(project: &Project) -> Value {
    let (sequence, sequence_error) = if project.adcd.nodes.is_empty() {
        (None, None)
    } else {
        match optimal_sequence(&project.adcd) {
            Ok(s) => (Some(s), None),
            Err(e) => (None, Some(e.to_string())),
        }
    };
    json!({
        "assembly_issues": detect_assembly_issues(&project.adcd),
        "dfd_issues": detect_dfd_issues(&project.adcd, &project.config.reusable_modules, project.config.diversity_threshold),
        "sequence": sequence,
        "sequence_error": sequence_error,
    })
}

async fn adcd_issues(State(state): State<Arc<AppState>>) -> Response {
    let (project, revision) = state.snapshot();
    with_etag(revision, adcd_summary(&project))
}

/// Serves until interrupted. Binds to loopback only.
pub async fn serve(path: &Path, port: u16) -> Result<(), String> {
    let state = AppState::load(path).map_err(|e| e.to_string())?;
    let addr = SocketAddr::from(([127, 0, 0, 1], port));
    let listener = tokio::net::TcpListener::bind(addr).await.map_err(|e| format!("cannot bind {addr}: {e}"))?;
    eprintln!("serving {} on http://{addr}", path.display());
    axum::serve(listener, router(state))
        .with_graceful_shutdown(async {
            let _ = tokio::signal::ctrl_c().await;
        })
        .await
        .map_err(|e| e.to_string())
}
