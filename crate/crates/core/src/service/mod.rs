//! HTTP+JSON front end over the engine and store.
//!
//! Mutations are serialized per session: the handler takes the session's
//! lock, reloads it from disk, checks `expected_version`, applies the change
//! and saves atomically before releasing the lock.

mod error;

use std::collections::{BTreeMap, HashMap};
use std::net::SocketAddr;
use std::path::PathBuf;
use std::sync::{Arc, Mutex};

use axum::extract::rejection::{JsonRejection, QueryRejection};
use axum::extract::{Path, Query, State};
use axum::http::{header, StatusCode};
use axum::response::{IntoResponse, Response};
use axum::routing::{delete, get, post};
use axum::{Json, Router};
use chrono::{DateTime, Utc};
use serde::{Deserialize, Serialize};
use serde_json::json;

use crate::blueprint::{self, BlueprintError, ReportFormat, ReportOptions, ViewKind};
use crate::catalog::{self, Catalog, StageKind};
use crate::engine::{self, OverrideFlag, QuestionStatus, Session, SessionMeta, StageProgress};
use crate::outcomes;
use crate::store::{CatalogRegistry, Store};

pub use error::{ApiError, ErrorCode};

type Clock = Arc<dyn Fn() -> DateTime<Utc> + Send + Sync>;

/// Shared state behind every handler.
#[derive(Clone)]
pub struct AppState {
    store: Store,
    catalog: Arc<Catalog>,
    registry: Arc<CatalogRegistry>,
    locks: Arc<Mutex<HashMap<String, Arc<tokio::sync::Mutex<()>>>>>,
    clock: Clock,
}

impl AppState {
    /// `catalog` is used for new sessions; sessions pinned to catalogs kept in
    /// the store stay loadable.
    pub fn new(store: Store, catalog: Arc<Catalog>) -> Result<Self, ApiError> {
        store.save_catalog(&catalog)?;
        let registry = store.registry([Arc::clone(&catalog)])?;
        Ok(AppState {
            store,
            catalog,
            registry: Arc::new(registry),
            locks: Arc::default(),
            clock: Arc::new(Utc::now),
        })
    }

    /// Replaces the wall clock, for reproducible timestamps in tests.
    pub fn with_clock(mut self, clock: impl Fn() -> DateTime<Utc> + Send + Sync + 'static) -> Self {
        self.clock = Arc::new(clock);
        self
    }

    pub fn store(&self) -> &Store {
        &self.store
    }

    fn lock_for(&self, id: &str) -> Arc<tokio::sync::Mutex<()>> {
        let mut locks = self.locks.lock().expect("lock table poisoned");
        Arc::clone(locks.entry(id.to_string()).or_default())
    }

    fn load(&self, id: &str) -> Result<(Session, Arc<Catalog>), ApiError> {
        Ok(self.store.load_session(id, &self.registry)?)
    }

    /// Runs `change` under the session lock and persists the result.
    async fn mutate<T>(
        &self,
        id: &str,
        change: impl FnOnce(&mut Session, &Catalog, DateTime<Utc>) -> Result<T, engine::EngineError>,
    ) -> Result<T, ApiError> {
        let lock = self.lock_for(id);
        let _guard = lock.lock().await;
        let (mut session, catalog) = self.load(id)?;
        let before = session.version;
        let out = change(&mut session, &catalog, (self.clock)())?;
        if session.version != before {
            self.store.save_session(&session)?;
        }
        Ok(out)
    }
}

pub fn router(state: AppState) -> Router {
    Router::new()
        .route("/catalog", get(get_catalog))
        .route("/catalog/questions", get(get_questions))
        .route("/sessions", post(create_session).get(list_sessions))
        .route("/sessions/{id}", get(get_session))
        .route("/sessions/{id}/answers", post(post_answer))
        .route("/sessions/{id}/answers/{qid}", delete(delete_answer))
        .route("/sessions/{id}/override", post(post_override))
        .route("/sessions/{id}/clone", post(post_clone))
        .route("/sessions/{id}/verdict", get(get_verdict))
        .route("/sessions/{id}/recommendation", get(get_recommendation))
        .route("/sessions/{id}/contradictions", get(get_contradictions))
        .route("/sessions/{id}/blueprint", get(get_blueprint))
        .route("/sessions/{id}/report", get(get_report))
        .route("/wiki/{term}", get(get_wiki))
        .fallback(no_route)
        .method_not_allowed_fallback(no_route)
        .with_state(state)
}

#[derive(Debug, Clone)]
pub struct ServeConfig {
    pub addr: SocketAddr,
    pub store: PathBuf,
    /// Catalog file; the bundled default when absent.
    pub catalog: Option<PathBuf>,
}

/// Loads the catalog, refusing to start when it does not validate, and
/// serves until interrupted.
pub async fn serve(config: ServeConfig) -> anyhow::Result<()> {
    let catalog = match &config.catalog {
        Some(path) => catalog::load_catalog_file(path)?,
        None => catalog::load_default_catalog(),
    };
    let store = Store::open(&config.store)?;
    let state = AppState::new(store, Arc::new(catalog)).map_err(|e| anyhow::anyhow!(e.message))?;
    let listener = tokio::net::TcpListener::bind(config.addr).await?;
    eprintln!("listening on http://{}", listener.local_addr()?);
    axum::serve(listener, router(state))
        .with_graceful_shutdown(async {
            let _ = tokio::signal::ctrl_c().await;
        })
        .await?;
    Ok(())
}

type ApiResult<T> = Result<T, ApiError>;

fn body<T>(payload: Result<Json<T>, JsonRejection>) -> ApiResult<T> {
    payload.map(|Json(v)| v).map_err(|e| ApiError::validation(e.body_text()))
}

fn query<T>(params: Result<Query<T>, QueryRejection>) -> ApiResult<T> {
    params.map(|Query(v)| v).map_err(|e| ApiError::validation(e.body_text()))
}

async fn no_route() -> ApiError {
    ApiError::new(ErrorCode::NotFound, "no such endpoint")
}

#[derive(Serialize)]
struct SubstageSummary<'a> {
    kind: catalog::SubstageKind,
    title: &'a str,
    question_count: usize,
}

#[derive(Serialize)]
struct StageSummary<'a> {
    kind: StageKind,
    title: &'a str,
    output_label: &'a str,
    question_count: usize,
    substages: Vec<SubstageSummary<'a>>,
}

async fn get_catalog(State(state): State<AppState>) -> Response {
    let c = &state.catalog;
    let stages: Vec<StageSummary<'_>> = c
        .stages()
        .iter()
        .map(|s| StageSummary {
            kind: s.kind,
            title: &s.title,
            output_label: &s.output_label,
            question_count: c.stage_question_count(s.kind),
            substages: s
                .substages
                .iter()
                .map(|ss| SubstageSummary { kind: ss.kind, title: &ss.title, question_count: ss.questions.len() })
                .collect(),
        })
        .collect();
    Json(json!({
        "id": c.id(),
        "version": c.version(),
        "hash": c.hash(),
        "question_count": c.question_count(),
        "stages": stages,
        "components": c.components(),
        "glossary_terms": c.glossary().iter().map(|g| g.term.as_str()).collect::<Vec<_>>(),
    }))
    .into_response()
}

#[derive(Deserialize)]
struct StageQuery {
    stage: Option<String>,
}

async fn get_questions(State(state): State<AppState>, params: Result<Query<StageQuery>, QueryRejection>) -> ApiResult<Response> {
    let params = query(params)?;
    let stage = params
        .stage
        .map(|s| s.parse::<StageKind>().map_err(ApiError::validation))
        .transpose()?;
    let c = &state.catalog;
    let questions: Vec<serde_json::Value> = c
        .questions()
        .filter(|(loc, _)| stage.is_none_or(|s| s == loc.stage))
        .map(|(loc, q)| json!({ "stage": loc.stage, "substage": loc.substage, "question": q }))
        .collect();
    Ok(Json(questions).into_response())
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct CreateSession {
    name: String,
    #[serde(default)]
    description: String,
}

async fn create_session(State(state): State<AppState>, payload: Result<Json<CreateSession>, JsonRejection>) -> ApiResult<Response> {
    let req = body(payload)?;
    if req.name.trim().is_empty() {
        return Err(ApiError::validation("session name must not be empty"));
    }
    let mut meta = SessionMeta::new(req.name, (state.clock)());
    meta.description = req.description;
    let session = Session::new(&state.catalog, meta);
    state.store.save_session(&session)?;
    Ok((StatusCode::CREATED, Json(session)).into_response())
}

async fn list_sessions(State(state): State<AppState>) -> ApiResult<Response> {
    Ok(Json(state.store.list_sessions(&state.registry)?).into_response())
}

#[derive(Serialize)]
struct SessionView<'a> {
    session: &'a Session,
    questions: Vec<QuestionStatus>,
    progress: Vec<StageProgress>,
}

async fn get_session(State(state): State<AppState>, Path(id): Path<String>) -> ApiResult<Response> {
    let (session, catalog) = state.load(&id)?;
    let view = SessionView {
        session: &session,
        questions: engine::eligible_questions(&catalog, &session, None),
        progress: engine::stage_status(&catalog, &session),
    };
    Ok(Json(view).into_response())
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct AnswerBody {
    question_id: String,
    option_id: String,
    #[serde(default)]
    note: Option<String>,
    expected_version: u64,
}

async fn post_answer(
    State(state): State<AppState>,
    Path(id): Path<String>,
    payload: Result<Json<AnswerBody>, JsonRejection>,
) -> ApiResult<Response> {
    let req = body(payload)?;
    let summary = state
        .mutate(&id, |s, c, at| s.record_answer(c, &req.question_id, &req.option_id, req.note, req.expected_version, at))
        .await?;
    Ok(Json(summary).into_response())
}

#[derive(Deserialize)]
struct VersionQuery {
    expected_version: Option<u64>,
}

async fn delete_answer(
    State(state): State<AppState>,
    Path((id, qid)): Path<(String, String)>,
    params: Result<Query<VersionQuery>, QueryRejection>,
) -> ApiResult<Response> {
    let expected = query(params)?
        .expected_version
        .ok_or_else(|| ApiError::validation("query parameter `expected_version` is required"))?;
    let summary = state.mutate(&id, |s, c, at| s.retract_answer(c, &qid, expected, at)).await?;
    Ok(Json(summary).into_response())
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct OverrideBody {
    flag: OverrideFlag,
    #[serde(default)]
    note: Option<String>,
    expected_version: u64,
}

async fn post_override(
    State(state): State<AppState>,
    Path(id): Path<String>,
    payload: Result<Json<OverrideBody>, JsonRejection>,
) -> ApiResult<Response> {
    let req = body(payload)?;
    let summary = state
        .mutate(&id, |s, c, at| s.set_override(c, req.flag, req.note, req.expected_version, at))
        .await?;
    Ok(Json(summary).into_response())
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct CloneBody {
    name: String,
}

async fn post_clone(
    State(state): State<AppState>,
    Path(id): Path<String>,
    payload: Result<Json<CloneBody>, JsonRejection>,
) -> ApiResult<Response> {
    let req = body(payload)?;
    if req.name.trim().is_empty() {
        return Err(ApiError::validation("session name must not be empty"));
    }
    let lock = state.lock_for(&id);
    let _guard = lock.lock().await;
    let clone = state.store.clone_session(&id, &req.name, &state.registry, (state.clock)())?;
    Ok((StatusCode::CREATED, Json(clone)).into_response())
}

async fn get_verdict(State(state): State<AppState>, Path(id): Path<String>) -> ApiResult<Response> {
    let (session, catalog) = state.load(&id)?;
    Ok(Json(outcomes::evaluate_suitability(&catalog, &session)).into_response())
}

async fn get_recommendation(State(state): State<AppState>, Path(id): Path<String>) -> ApiResult<Response> {
    let (session, catalog) = state.load(&id)?;
    Ok(Json(outcomes::recommend_access_model(&catalog, &session)).into_response())
}

async fn get_contradictions(State(state): State<AppState>, Path(id): Path<String>) -> ApiResult<Response> {
    let (session, catalog) = state.load(&id)?;
    Ok(Json(outcomes::detect_contradictions(&catalog, &session)).into_response())
}

#[derive(Deserialize)]
struct BlueprintQuery {
    #[serde(default)]
    force: bool,
}

async fn get_blueprint(
    State(state): State<AppState>,
    Path(id): Path<String>,
    params: Result<Query<BlueprintQuery>, QueryRejection>,
) -> ApiResult<Response> {
    let force = query(params)?.force;
    let (session, catalog) = state.load(&id)?;
    match blueprint::generate_blueprint(&catalog, &session, force) {
        Ok(bp) => Ok(Json(bp).into_response()),
        Err(BlueprintError::StageGated) => Err(ApiError::gated("design stage is locked by a not-suitable verdict")),
        Err(BlueprintError::BlockedByContradictions(found)) => Err(ApiError::new(ErrorCode::Validation, "blocked by contradictions")
            .with_details(json!({ "reason": "blocked_by_contradictions", "contradictions": found }))),
    }
}

#[derive(Deserialize)]
struct ReportQuery {
    format: Option<String>,
    views: Option<String>,
}

async fn get_report(
    State(state): State<AppState>,
    Path(id): Path<String>,
    params: Result<Query<ReportQuery>, QueryRejection>,
) -> ApiResult<Response> {
    let params = query(params)?;
    let format: ReportFormat = params.format.as_deref().unwrap_or("json").parse()?;
    let views: Vec<ViewKind> = match params.views.as_deref() {
        None => ViewKind::ALL.to_vec(),
        Some(list) => blueprint::parse_views(list)?,
    };
    let (session, catalog) = state.load(&id)?;
    let bytes = blueprint::export_report(&catalog, &session, format, &views, &ReportOptions::default());
    Ok(([(header::CONTENT_TYPE, format.content_type())], bytes).into_response())
}

async fn get_wiki(State(state): State<AppState>, Path(term): Path<String>) -> ApiResult<Response> {
    let entry = state
        .catalog
        .glossary_entry(&term)
        .ok_or_else(|| ApiError::new(ErrorCode::NotFound, format!("no glossary entry for `{term}`")))?;
    let used_by: Vec<&str> = state
        .catalog
        .questions()
        .filter(|(_, q)| q.wiki_terms.iter().any(|t| *t == term))
        .map(|(_, q)| q.id.as_str())
        .collect();
    let mut doc: BTreeMap<&str, serde_json::Value> = BTreeMap::new();
    doc.insert("term", json!(entry.term));
    doc.insert("definition", json!(entry.definition));
    doc.insert("see_also", json!(entry.see_also));
    doc.insert("questions", json!(used_by));
    Ok(Json(doc).into_response())
}
