//! HTTP facade over an on-disk scenario and run store.
//!
//! Routes:
//!
//! - `POST /scenarios`, `GET /scenarios/{id}`
//! - `POST /scenarios/{id}/runs`, `GET /runs/{id}`, `GET /runs/{id}/{kpis,gantt,report}`
//! - `POST /scenarios/{id}/whatif`, `POST /scenarios/{id}/whatif/commit`
//!
//! Runs execute on the blocking pool and are polled. Result documents use
//! the canonical export form; `?format=csv` selects CSV.

use std::collections::HashMap;
use std::fs;
use std::path::{Path, PathBuf};
use std::sync::atomic::{AtomicU64, Ordering};
use std::sync::Arc;

use axum::body::Bytes;
use axum::extract::{Path as UrlPath, Query, State};
use axum::http::{header, HeaderValue, StatusCode};
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post};
use axum::Router;
use serde::{Deserialize, Serialize};

use crate::analysis::{what_if, WhatIfRequest};
use crate::error::{Error, IngestError};
use crate::io::{export_report, write_atomic, Canon, ExportFormat, Report, ScenarioBundle, ServiceConfig, ToCanon};
use crate::runs::{execute, RunMode, RunResult};
use crate::scenario::Violation;
use crate::sim::{DurationMode, SimOptions};
use crate::strategy::Strategy;

pub const LISTEN_ENV: &str = "OR_TWIN_LISTEN";
pub const DATA_DIR_ENV: &str = "OR_TWIN_DATA_DIR";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StoredScenario {
    pub version: u64,
    pub bundle: ScenarioBundle,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RunStatus {
    Pending,
    Running,
    Done,
    Failed,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunRecord {
    pub run_id: String,
    pub scenario_id: String,
    pub scenario_version: u64,
    pub mode: RunMode,
    /// Options the run was executed with.
    pub options: SimOptions,
    pub status: RunStatus,
    /// Store-relative path of the result document once done.
    pub result: Option<String>,
    pub error: Option<String>,
}

/// Body of `POST /scenarios/{id}/runs`. Unset fields keep the scenario's options.
#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunRequest {
    pub mode: RunMode,
    #[serde(default)]
    pub seed: Option<u64>,
    #[serde(default)]
    pub replications: Option<u32>,
    #[serde(default)]
    pub strategy: Option<Strategy>,
    #[serde(default)]
    pub duration_mode: Option<DurationMode>,
}

impl RunRequest {
    fn apply(&self, options: &SimOptions) -> SimOptions {
        let mut out = options.clone();
        if let Some(seed) = self.seed {
            out.base_seed = seed;
        }
        if let Some(n) = self.replications {
            out.replications = n;
        }
        if let Some(s) = self.strategy {
            out.strategy = s;
        }
        if let Some(m) = self.duration_mode {
            out.duration_mode = m;
        }
        out
    }
}

#[derive(Debug, Clone, Deserialize)]
pub struct CommitRequest {
    pub expected_version: u64,
    #[serde(flatten)]
    pub request: WhatIfRequest,
}

#[derive(Debug)]
pub enum ServiceError {
    BadRequest {
        code: &'static str,
        message: String,
    },
    NotFound(String),
    Conflict {
        code: &'static str,
        message: String,
    },
    Unprocessable {
        code: &'static str,
        message: String,
        violations: Vec<Violation>,
    },
    Internal(String),
}

impl ServiceError {
    fn status(&self) -> StatusCode {
        match self {
            ServiceError::BadRequest { .. } => StatusCode::BAD_REQUEST,
            ServiceError::NotFound(_) => StatusCode::NOT_FOUND,
            ServiceError::Conflict { .. } => StatusCode::CONFLICT,
            ServiceError::Unprocessable { .. } => StatusCode::UNPROCESSABLE_ENTITY,
            ServiceError::Internal(_) => StatusCode::INTERNAL_SERVER_ERROR,
        }
    }

    fn malformed(message: impl ToString) -> Self {
        ServiceError::BadRequest {
            code: "MALFORMED_REQUEST",
            message: message.to_string(),
        }
    }
}

impl From<Error> for ServiceError {
    fn from(e: Error) -> Self {
        ServiceError::Unprocessable {
            code: e.code(),
            message: e.to_string(),
            violations: Vec::new(),
        }
    }
}

impl From<IngestError> for ServiceError {
    fn from(e: IngestError) -> Self {
        match e {
            IngestError::Invalid(violations) => ServiceError::Unprocessable {
                code: "VALIDATION_FAILED",
                message: format!("{} violation(s)", violations.len()),
                violations,
            },
            IngestError::Io { .. } => ServiceError::Internal(e.to_string()),
            IngestError::Json { .. } | IngestError::Parse { .. } | IngestError::UnsupportedFormat(_) => {
                ServiceError::BadRequest {
                    code: e.code(),
                    message: e.to_string(),
                }
            }
            other => ServiceError::Unprocessable {
                code: other.code(),
                message: other.to_string(),
                violations: Vec::new(),
            },
        }
    }
}

impl IntoResponse for ServiceError {
    fn into_response(self) -> Response {
        let status = self.status();
        let (code, message, violations) = match self {
            ServiceError::BadRequest { code, message } | ServiceError::Conflict { code, message } => {
                (code, message, None)
            }
            ServiceError::NotFound(message) => ("NOT_FOUND", message, None),
            ServiceError::Unprocessable {
                code,
                message,
                violations,
            } => (code, message, Some(violations)),
            ServiceError::Internal(message) => ("INTERNAL", message, None),
        };
        let mut fields = vec![("code", Canon::Str(code.into())), ("message", Canon::Str(message))];
        if let Some(v) = violations {
            fields.push(("violations", v.to_canon()));
        }
        json(status, Canon::Obj(fields).to_json())
    }
}

type Reply = Result<Response, ServiceError>;

fn json(status: StatusCode, body: String) -> Response {
    (status, [(header::CONTENT_TYPE, "application/json")], body).into_response()
}

fn etag(version: u64) -> HeaderValue {
    HeaderValue::from_str(&format!("\"{version}\"")).expect("ascii")
}

/// Ids become file names, so only a conservative alphabet is accepted.
fn safe_id(id: &str) -> bool {
    !id.is_empty()
        && id.len() <= 128
        && !id.starts_with('.')
        && id
            .chars()
            .all(|c| c.is_ascii_alphanumeric() || matches!(c, '-' | '_' | '.'))
}

fn parse<T: for<'de> Deserialize<'de>>(body: &Bytes) -> Result<T, ServiceError> {
    serde_json::from_slice(body).map_err(ServiceError::malformed)
}

/// Scenario and run documents under one directory.
#[derive(Debug, Clone)]
pub struct Store {
    root: PathBuf,
}

impl Store {
    pub fn open(root: impl Into<PathBuf>) -> Result<Store, IngestError> {
        let root = root.into();
        for sub in ["scenarios", "runs"] {
            let dir = root.join(sub);
            fs::create_dir_all(&dir).map_err(|e| IngestError::Io { path: dir, source: e })?;
        }
        Ok(Store { root })
    }

    pub fn root(&self) -> &Path {
        &self.root
    }

    fn scenario_path(&self, id: &str) -> PathBuf {
        self.root.join("scenarios").join(format!("{id}.json"))
    }

    fn run_dir(&self, id: &str) -> PathBuf {
        self.root.join("runs").join(id)
    }

    fn read<T: for<'de> Deserialize<'de>>(path: &Path) -> Result<Option<T>, ServiceError> {
        match fs::read(path) {
            Ok(bytes) => serde_json::from_slice(&bytes)
                .map(Some)
                .map_err(|e| ServiceError::Internal(format!("{}: {e}", path.display()))),
            Err(e) if e.kind() == std::io::ErrorKind::NotFound => Ok(None),
            Err(e) => Err(ServiceError::Internal(format!("{}: {e}", path.display()))),
        }
    }

    fn write<T: Serialize>(path: &Path, value: &T) -> Result<(), ServiceError> {
        let bytes = serde_json::to_vec_pretty(value).expect("store documents serialize");
        write_atomic(path, &bytes).map_err(ServiceError::from)
    }

    pub fn scenario(&self, id: &str) -> Result<Option<StoredScenario>, ServiceError> {
        if !safe_id(id) {
            return Ok(None);
        }
        Self::read(&self.scenario_path(id))
    }

    pub fn put_scenario(&self, stored: &StoredScenario) -> Result<(), ServiceError> {
        Self::write(&self.scenario_path(&stored.bundle.scenario.scenario_id), stored)
    }

    pub fn run(&self, id: &str) -> Result<Option<RunRecord>, ServiceError> {
        if !safe_id(id) {
            return Ok(None);
        }
        Self::read(&self.run_dir(id).join("record.json"))
    }

    pub fn put_run(&self, record: &RunRecord) -> Result<(), ServiceError> {
        let dir = self.run_dir(&record.run_id);
        fs::create_dir_all(&dir).map_err(|e| ServiceError::Internal(format!("{}: {e}", dir.display())))?;
        Self::write(&dir.join("record.json"), record)
    }

    pub fn result(&self, record: &RunRecord) -> Result<RunResult, ServiceError> {
        let locator = record
            .result
            .as_deref()
            .ok_or_else(|| ServiceError::Internal(format!("run {} has no result", record.run_id)))?;
        Self::read(&self.root.join(locator))?
            .ok_or_else(|| ServiceError::Internal(format!("result of run {} is missing", record.run_id)))
    }

    fn run_ids(&self) -> Vec<String> {
        fs::read_dir(self.root.join("runs"))
            .map(|dir| {
                dir.filter_map(|e| e.ok())
                    .filter_map(|e| e.file_name().into_string().ok())
                    .collect()
            })
            .unwrap_or_default()
    }
}

pub struct AppState {
    store: Store,
    next_run: AtomicU64,
    /// Serializes scenario creation and commits.
    writes: tokio::sync::Mutex<()>,
}

impl AppState {
    /// Opens the store, marking runs interrupted by a previous shutdown as failed.
    pub fn open(data_dir: impl Into<PathBuf>) -> Result<Arc<AppState>, IngestError> {
        let store = Store::open(data_dir)?;
        let mut last = 0;
        for id in store.run_ids() {
            if let Some(n) = id.strip_prefix("run-").and_then(|n| n.parse::<u64>().ok()) {
                last = last.max(n);
            }
            if let Ok(Some(mut record)) = store.run(&id) {
                if matches!(record.status, RunStatus::Pending | RunStatus::Running) {
                    record.status = RunStatus::Failed;
                    record.error = Some("interrupted by a service restart".into());
                    let _ = store.put_run(&record);
                }
            }
        }
        Ok(Arc::new(AppState {
            store,
            next_run: AtomicU64::new(last + 1),
            writes: tokio::sync::Mutex::new(()),
        }))
    }

    pub fn store(&self) -> &Store {
        &self.store
    }

    /// Adds `bundle` as version 1 unless a scenario with its id exists.
    pub fn seed(&self, bundle: &ScenarioBundle) -> Result<bool, ServiceError> {
        let id = &bundle.scenario.scenario_id;
        if !safe_id(id) {
            return Err(ServiceError::malformed(format!(
                "scenario id {id:?} is not usable as a key"
            )));
        }
        if self.store.scenario(id)?.is_some() {
            return Ok(false);
        }
        self.store.put_scenario(&StoredScenario {
            version: 1,
            bundle: bundle.clone(),
        })?;
        Ok(true)
    }
}

pub fn router(state: Arc<AppState>) -> Router {
    Router::new()
        .route("/scenarios", post(create_scenario))
        .route("/scenarios/{id}", get(get_scenario))
        .route("/scenarios/{id}/runs", post(create_run))
        .route("/scenarios/{id}/whatif", post(whatif))
        .route("/scenarios/{id}/whatif/commit", post(commit))
        .route("/runs/{id}", get(get_run))
        .route("/runs/{id}/{doc}", get(get_run_document))
        .with_state(state)
}

fn scenario_or_404(state: &AppState, id: &str) -> Result<StoredScenario, ServiceError> {
    state
        .store
        .scenario(id)?
        .ok_or_else(|| ServiceError::NotFound(format!("no scenario {id:?}")))
}

async fn create_scenario(State(state): State<Arc<AppState>>, body: Bytes) -> Reply {
    let text = std::str::from_utf8(&body).map_err(ServiceError::malformed)?;
    let bundle = ScenarioBundle::from_json(text, Path::new("request body"))?;
    bundle.check()?;
    let id = bundle.scenario.scenario_id.clone();
    let _guard = state.writes.lock().await;
    if !state.seed(&bundle)? {
        return Err(ServiceError::Conflict {
            code: "SCENARIO_EXISTS",
            message: format!("scenario {id:?} already exists"),
        });
    }
    tracing::info!(scenario = %id, "scenario created");
    let body = Canon::Obj(vec![("scenario_id", Canon::Str(id)), ("version", Canon::Int(1))]);
    let mut resp = json(StatusCode::CREATED, body.to_json());
    resp.headers_mut().insert(header::ETAG, etag(1));
    Ok(resp)
}

async fn get_scenario(State(state): State<Arc<AppState>>, UrlPath(id): UrlPath<String>) -> Reply {
    let stored = scenario_or_404(&state, &id)?;
    let mut resp = json(StatusCode::OK, stored.bundle.to_json());
    resp.headers_mut().insert(header::ETAG, etag(stored.version));
    Ok(resp)
}

async fn create_run(State(state): State<Arc<AppState>>, UrlPath(id): UrlPath<String>, body: Bytes) -> Reply {
    let stored = scenario_or_404(&state, &id)?;
    let request: RunRequest = parse(&body)?;
    let mut snapshot = stored.bundle;
    snapshot.options = request.apply(&snapshot.options);
    snapshot.options.check()?;

    let run_id = format!("run-{:06}", state.next_run.fetch_add(1, Ordering::SeqCst));
    let mut record = RunRecord {
        run_id: run_id.clone(),
        scenario_id: id,
        scenario_version: stored.version,
        mode: request.mode,
        options: snapshot.options.clone(),
        status: RunStatus::Pending,
        result: None,
        error: None,
    };
    state.store.put_run(&record)?;
    Store::write(&state.store.run_dir(&run_id).join("scenario.json"), &snapshot)?;
    tracing::info!(run = %run_id, mode = %request.mode, "run queued");

    let store = state.store.clone();
    tokio::task::spawn_blocking(move || {
        record.status = RunStatus::Running;
        let _ = store.put_run(&record);
        match execute(&snapshot, record.mode) {
            Ok(result) => {
                let locator = format!("runs/{}/result.json", record.run_id);
                match Store::write(&store.root.join(&locator), &result) {
                    Ok(()) => {
                        record.status = RunStatus::Done;
                        record.result = Some(locator);
                    }
                    Err(e) => {
                        record.status = RunStatus::Failed;
                        record.error = Some(format!("{e:?}"));
                    }
                }
            }
            Err(e) => {
                record.status = RunStatus::Failed;
                record.error = Some(format!("{}: {e}", e.code()));
            }
        }
        tracing::info!(run = %record.run_id, status = ?record.status, "run finished");
        let _ = store.put_run(&record);
    });

    let body = Canon::Obj(vec![
        ("run_id", Canon::Str(run_id.clone())),
        ("status", Canon::Str("pending".into())),
    ]);
    let mut resp = json(StatusCode::ACCEPTED, body.to_json());
    resp.headers_mut().insert(
        header::LOCATION,
        HeaderValue::from_str(&format!("/runs/{run_id}")).expect("ascii"),
    );
    Ok(resp)
}

fn run_or_404(state: &AppState, id: &str) -> Result<RunRecord, ServiceError> {
    state
        .store
        .run(id)?
        .ok_or_else(|| ServiceError::NotFound(format!("no run {id:?}")))
}

async fn get_run(State(state): State<Arc<AppState>>, UrlPath(id): UrlPath<String>) -> Reply {
    let record = run_or_404(&state, &id)?;
    Ok(json(
        StatusCode::OK,
        serde_json::to_string_pretty(&record).expect("record serializes"),
    ))
}

async fn get_run_document(
    State(state): State<Arc<AppState>>,
    UrlPath((id, doc)): UrlPath<(String, String)>,
    Query(query): Query<HashMap<String, String>>,
) -> Reply {
    if !matches!(doc.as_str(), "kpis" | "gantt" | "report") {
        return Err(ServiceError::NotFound(format!("no document {doc:?}")));
    }
    let format: ExportFormat = query.get("format").map_or("json", String::as_str).parse()?;
    let record = run_or_404(&state, &id)?;
    match record.status {
        RunStatus::Pending | RunStatus::Running => {
            return Err(ServiceError::Conflict {
                code: "RUN_PENDING",
                message: format!("run {id} is {:?}", record.status).to_lowercase(),
            })
        }
        RunStatus::Failed => {
            return Err(ServiceError::Unprocessable {
                code: "RUN_FAILED",
                message: record.error.unwrap_or_default(),
                violations: Vec::new(),
            })
        }
        RunStatus::Done => {}
    }
    let result = state.store.result(&record)?;
    let report = match doc.as_str() {
        "kpis" => Report::Kpi(result.kpis()),
        "gantt" => Report::Gantt(result.gantt()),
        _ => result.report(),
    };
    let body = export_report(report, format);
    Ok(match format {
        ExportFormat::Json => json(StatusCode::OK, body),
        ExportFormat::Csv => (StatusCode::OK, [(header::CONTENT_TYPE, "text/csv")], body).into_response(),
    })
}

async fn whatif(State(state): State<Arc<AppState>>, UrlPath(id): UrlPath<String>, body: Bytes) -> Reply {
    let stored = scenario_or_404(&state, &id)?;
    let request: WhatIfRequest = parse(&body)?;
    let bundle = &stored.bundle;
    let outcome = what_if(&bundle.scenario, &bundle.options, &bundle.targets, &request)?;
    let mut resp = json(
        StatusCode::OK,
        export_report(Report::WhatIf(&outcome), ExportFormat::Json),
    );
    resp.headers_mut().insert(header::ETAG, etag(stored.version));
    Ok(resp)
}

async fn commit(State(state): State<Arc<AppState>>, UrlPath(id): UrlPath<String>, body: Bytes) -> Reply {
    let request: CommitRequest = parse(&body)?;
    let _guard = state.writes.lock().await;
    let mut stored = scenario_or_404(&state, &id)?;
    if stored.version != request.expected_version {
        return Err(ServiceError::Conflict {
            code: "VERSION_CONFLICT",
            message: format!(
                "scenario {id} is at version {}, not {}",
                stored.version, request.expected_version
            ),
        });
    }
    let bundle = &mut stored.bundle;
    let outcome = what_if(&bundle.scenario, &bundle.options, &bundle.targets, &request.request)?;
    bundle.scenario.cases.push(outcome.case.clone());
    bundle.scenario.register_case_surgeons();
    stored.version += 1;
    state.store.put_scenario(&stored)?;
    tracing::info!(scenario = %id, case = %outcome.case.case_id, version = stored.version, "what-if committed");

    let body = Canon::Obj(vec![
        ("scenario_id", Canon::Str(id)),
        ("version", Canon::Int(stored.version as i64)),
        ("case_id", Canon::Str(outcome.case.case_id.clone())),
        ("chosen_room", Canon::Str(outcome.chosen_room.clone())),
        ("start_time", Canon::Time(outcome.start_time)),
    ]);
    let mut resp = json(StatusCode::OK, body.to_json());
    resp.headers_mut().insert(header::ETAG, etag(stored.version));
    Ok(resp)
}

/// Listen address and data directory after environment overrides.
pub fn effective_config(config: &ServiceConfig) -> ServiceConfig {
    ServiceConfig {
        listen: std::env::var(LISTEN_ENV).unwrap_or_else(|_| config.listen.clone()),
        data_dir: std::env::var_os(DATA_DIR_ENV).map_or_else(|| config.data_dir.clone(), PathBuf::from),
    }
}

/// Serves until the process is stopped. `initial` is added to the store if absent.
pub async fn serve(config: &ServiceConfig, initial: Option<&ScenarioBundle>) -> std::io::Result<()> {
    let state = AppState::open(&config.data_dir).map_err(std::io::Error::other)?;
    if let Some(bundle) = initial {
        state
            .seed(bundle)
            .map_err(|e| std::io::Error::other(format!("{e:?}")))?;
    }
    let listener = tokio::net::TcpListener::bind(&config.listen).await?;
    tracing::info!(addr = %listener.local_addr()?, data_dir = %config.data_dir.display(), "listening");
    axum::serve(listener, router(state)).await
}
