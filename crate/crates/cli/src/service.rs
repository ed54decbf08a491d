//! HTTP service: selection against the current snapshot, record ingest and
//! retraining with atomic snapshot swaps.

use std::sync::{Arc, Mutex, RwLock};
use std::time::Duration;

use axum::body::Bytes;
use axum::extract::State;
use axum::http::StatusCode;
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post};
use axum::{Json, Router};
use metainf_core::embedding::{Embedder, PromptStyle};
use metainf_core::perfdb::{RecordFormat, RecordStore};
use metainf_core::selectors::SelectorKind;
use metainf_core::{Budget, Error as CoreError, MethodConfig, RankedMethod};
use serde::{Deserialize, Serialize};

use crate::config::AppConfig;
use crate::error::{CliError, CliResult};
use crate::snapshot::{request_task, Snapshot, TrainOptions};

/// Wire schema version carried in the `v` field.
pub const WIRE_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TaskSpec {
    pub description: String,
    pub batch_size: u32,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub prompt_count: Option<u32>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub source_tag: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HardwareSpec {
    pub gpu_class: String,
    pub gpu_count: u32,
    pub price_per_hour: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub memory_gb: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SelectRequest {
    pub v: u32,
    pub task: TaskSpec,
    pub model: String,
    pub hardware: HardwareSpec,
    #[serde(default)]
    pub budget: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SelectResponse {
    pub v: u32,
    pub method: MethodConfig,
    pub method_name: String,
    pub predicted_runtime_s: f64,
    pub cost: f64,
    pub feasible_set_size: usize,
    pub ranking: Vec<RankedMethod>,
    pub model_version: String,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct TrainRequest {
    #[serde(default)]
    pub selector: Option<SelectorKind>,
    #[serde(default)]
    pub style: Option<PromptStyle>,
    #[serde(default)]
    pub rank: Option<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ErrorBody {
    pub v: u32,
    pub error: String,
    pub message: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub model_version: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub cheapest_cost: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub cheapest_method: Option<String>,
}

struct ApiError {
    status: StatusCode,
    body: ErrorBody,
}

impl ApiError {
    fn new(status: StatusCode, error: &str, message: impl Into<String>) -> Self {
        ApiError {
            status,
            body: ErrorBody {
                v: WIRE_VERSION,
                error: error.into(),
                message: message.into(),
                model_version: None,
                cheapest_cost: None,
                cheapest_method: None,
            },
        }
    }

    fn with_version(mut self, version: &str) -> Self {
        self.body.model_version = Some(version.to_string());
        self
    }
}

impl From<CliError> for ApiError {
    fn from(e: CliError) -> Self {
        let message = e.to_string();
        match e {
            CliError::Usage(_) => ApiError::new(StatusCode::UNPROCESSABLE_ENTITY, "invalid_request", message),
            CliError::NoSnapshot(_) => ApiError::new(StatusCode::SERVICE_UNAVAILABLE, "no_snapshot", message),
            CliError::Core(core) => match core {
                CoreError::Infeasible {
                    cheapest_cost,
                    cheapest_method,
                    ..
                } => {
                    let mut err = ApiError::new(StatusCode::UNPROCESSABLE_ENTITY, "infeasible", message);
                    err.body.cheapest_cost = Some(cheapest_cost);
                    err.body.cheapest_method = Some(cheapest_method);
                    err
                }
                CoreError::InvalidInput(_)
                | CoreError::UnknownId { .. }
                | CoreError::Dimension { .. }
                | CoreError::MissingEmbedding(_)
                | CoreError::EmptyStore => ApiError::new(StatusCode::UNPROCESSABLE_ENTITY, "invalid_request", message),
                CoreError::Malformed { .. } | CoreError::Json(_) | CoreError::Csv(_) => {
                    ApiError::new(StatusCode::BAD_REQUEST, "malformed", message)
                }
                CoreError::Conflict { .. } => ApiError::new(StatusCode::CONFLICT, "conflict", message),
                CoreError::Provider { .. } => ApiError::new(StatusCode::BAD_GATEWAY, "provider", message),
                _ => ApiError::new(StatusCode::INTERNAL_SERVER_ERROR, "internal", message),
            },
        }
    }
}

impl IntoResponse for ApiError {
    fn into_response(self) -> Response {
        (self.status, Json(self.body)).into_response()
    }
}

/// Shared service state. Snapshots are immutable; a retrain replaces the
/// `Arc` under the lock, so each request sees exactly one version.
pub struct AppState {
    pub config: AppConfig,
    snapshot: RwLock<Option<Arc<Snapshot>>>,
    store: Mutex<RecordStore>,
    training: tokio::sync::Mutex<()>,
    embedder: Arc<Embedder>,
}

impl AppState {
    pub fn new(config: AppConfig, store: RecordStore, snapshot: Option<Snapshot>) -> CliResult<Self> {
        let embedder = Arc::new(Embedder::new(config.provider.clone())?);
        if let Some(s) = &snapshot {
            s.attach(&embedder);
        }
        Ok(AppState {
            config,
            snapshot: RwLock::new(snapshot.map(Arc::new)),
            store: Mutex::new(store),
            training: tokio::sync::Mutex::new(()),
            embedder,
        })
    }

    /// Loads the record store and snapshot named by `config`.
    pub fn from_config(config: AppConfig) -> CliResult<Self> {
        let store = if config.record_store.exists() {
            RecordStore::load(&config.record_store)?
        } else {
            RecordStore::new()
        };
        let snapshot = Snapshot::load(&config.model_store)?;
        AppState::new(config, store, snapshot)
    }

    pub fn current(&self) -> Option<Arc<Snapshot>> {
        self.snapshot.read().expect("snapshot lock").clone()
    }

    fn swap(&self, snap: Snapshot) -> Arc<Snapshot> {
        snap.attach(&self.embedder);
        let snap = Arc::new(snap);
        *self.snapshot.write().expect("snapshot lock") = Some(snap.clone());
        snap
    }

    /// Trains on the current records, persists and installs the snapshot.
    pub fn retrain(&self, opts: TrainOptions) -> CliResult<Arc<Snapshot>> {
        let store = self.store.lock().expect("store lock").clone();
        let snap = Snapshot::train(&store, opts, self.embedder.clone())?;
        snap.save(&self.config.model_store)?;
        log::info!("installed snapshot {}", snap.model_version);
        Ok(self.swap(snap))
    }
}

/// Library-level selection for one request against one snapshot.
pub fn select_for(snap: &Snapshot, req: &SelectRequest, default_budget: Option<f64>) -> CliResult<SelectResponse> {
    if req.v != WIRE_VERSION {
        return Err(CliError::Usage(format!("unsupported schema version {}", req.v)));
    }
    let task = request_task(
        &req.task.description,
        req.task.batch_size,
        &req.model,
        req.task.prompt_count,
        req.task.source_tag.as_deref(),
    )?;
    let h = &req.hardware;
    let hw = snap.hardware_profile(&h.gpu_class, h.gpu_count, h.price_per_hour, h.memory_gb)?;
    let budget = match req.budget.or(default_budget) {
        Some(b) => Budget::new(b)?,
        None => Budget::unlimited(),
    };
    let r = snap.select(&task, &hw, budget)?;
    Ok(SelectResponse {
        v: WIRE_VERSION,
        method: r.method,
        method_name: r.method.to_string(),
        predicted_runtime_s: r.predicted_runtime_s,
        cost: r.cost.amount,
        feasible_set_size: r.feasible_set_size,
        ranking: r.ranking,
        model_version: snap.model_version.clone(),
    })
}

async fn health(State(state): State<Arc<AppState>>) -> Json<serde_json::Value> {
    let version = state.current().map(|s| s.model_version.clone());
    Json(serde_json::json!({ "status": "ok", "model_version": version }))
}

async fn select_handler(State(state): State<Arc<AppState>>, body: Bytes) -> Result<Json<SelectResponse>, ApiError> {
    let req: SelectRequest = serde_json::from_slice(&body)
        .map_err(|e| ApiError::new(StatusCode::BAD_REQUEST, "malformed", e.to_string()))?;
    let snap = state
        .current()
        .ok_or_else(|| ApiError::new(StatusCode::SERVICE_UNAVAILABLE, "no_snapshot", "no trained snapshot; POST /v1/train"))?;
    let default_budget = state.config.default_budget;
    let version = snap.model_version.clone();
    let timeout = Duration::from_secs_f64(state.config.request_timeout_s);
    let job = tokio::task::spawn_blocking(move || select_for(&snap, &req, default_budget));
    match tokio::time::timeout(timeout, job).await {
        Err(_) => Err(ApiError::new(StatusCode::GATEWAY_TIMEOUT, "timeout", "selection timed out").with_version(&version)),
        Ok(Err(join)) => Err(ApiError::new(StatusCode::INTERNAL_SERVER_ERROR, "internal", join.to_string())),
        Ok(Ok(result)) => result.map(Json).map_err(|e| ApiError::from(e).with_version(&version)),
    }
}

async fn records_handler(State(state): State<Arc<AppState>>, body: Bytes) -> Result<Json<serde_json::Value>, ApiError> {
    let job = tokio::task::spawn_blocking(move || -> CliResult<(usize, usize)> {
        let mut store = state.store.lock().expect("store lock");
        let n = store.ingest(body.as_ref(), RecordFormat::Jsonl)?;
        store.save(&state.config.record_store)?;
        Ok((n, store.len()))
    });
    let (ingested, total) = job
        .await
        .map_err(|e| ApiError::new(StatusCode::INTERNAL_SERVER_ERROR, "internal", e.to_string()))??;
    Ok(Json(serde_json::json!({ "v": WIRE_VERSION, "ingested": ingested, "records": total })))
}

async fn train_handler(State(state): State<Arc<AppState>>, body: Bytes) -> Result<Json<serde_json::Value>, ApiError> {
    let req: TrainRequest = if body.iter().all(u8::is_ascii_whitespace) {
        TrainRequest::default()
    } else {
        serde_json::from_slice(&body).map_err(|e| ApiError::new(StatusCode::BAD_REQUEST, "malformed", e.to_string()))?
    };
    let opts = TrainOptions {
        selector: req.selector.unwrap_or(state.config.selector),
        style: req.style.unwrap_or(state.config.style),
        rank: req.rank.unwrap_or(state.config.rank),
    };
    if opts.rank == 0 {
        return Err(ApiError::new(StatusCode::UNPROCESSABLE_ENTITY, "invalid_request", "rank must be >= 1"));
    }
    let Ok(_guard) = state.training.try_lock() else {
        return Err(ApiError::new(StatusCode::CONFLICT, "busy", "a training job is already running"));
    };
    let worker = state.clone();
    let snap = tokio::task::spawn_blocking(move || worker.retrain(opts))
        .await
        .map_err(|e| ApiError::new(StatusCode::INTERNAL_SERVER_ERROR, "internal", e.to_string()))??;
    Ok(Json(serde_json::json!({
        "v": WIRE_VERSION,
        "model_version": snap.model_version,
        "train_rows": snap.train_rows,
    })))
}

pub fn router(state: Arc<AppState>) -> Router {
    Router::new()
        .route("/v1/health", get(health))
        .route("/v1/select", post(select_handler))
        .route("/v1/records", post(records_handler))
        .route("/v1/train", post(train_handler))
        .with_state(state)
}

/// Runs the service until interrupted. Without a snapshot on disk, trains
/// one from the stored records if there are any.
pub async fn serve(config: AppConfig) -> CliResult<()> {
    let state = Arc::new(AppState::from_config(config)?);
    if state.current().is_none() && !state.store.lock().expect("store lock").is_empty() {
        let opts = TrainOptions {
            selector: state.config.selector,
            style: state.config.style,
            rank: state.config.rank,
        };
        let worker = state.clone();
        let trained = tokio::task::spawn_blocking(move || worker.retrain(opts))
            .await
            .map_err(|e| CliError::Usage(e.to_string()))?;
        if let Err(e) = trained {
            log::warn!("startup training failed: {e}; /v1/select answers 503 until trained");
        }
    }
    let listener = tokio::net::TcpListener::bind(&state.config.bind).await?;
    log::info!("listening on {}", listener.local_addr()?);
    axum::serve(listener, router(state))
        .with_graceful_shutdown(async {
            let _ = tokio::signal::ctrl_c().await;
        })
        .await?;
    Ok(())
}
