//! HTTP/JSON front end for the identification harness.
//!
//! Experiment runs, the offline cost oracle and dataset generation are stateless;
//! sessions hold one online estimator each and consume samples as they arrive.
//! Compute-heavy handlers run on the blocking pool.

mod error;

use std::collections::HashMap;
use std::sync::{Arc, Mutex};

use axum::extract::rejection::JsonRejection;
use axum::extract::{DefaultBodyLimit, FromRequest, Path, Request, State};
use axum::http::StatusCode;
use axum::routing::{get, post};
use axum::{Json, Router};
use serde::de::DeserializeOwned;
use serde::Serialize;
use tokio::net::TcpListener;
use uuid::Uuid;
use wiener_api::*;
use wiener_core::harness::{
    initial_theta, mean_estimating_vector, offline_cost, run_experiment, summarize, ExperimentConfig, OnlineSession,
};
use wiener_core::rng::replication_seed;

pub use error::ApiError;

/// Large enough for full trajectories of a few dozen long runs.
const BODY_LIMIT: usize = 512 * 1024 * 1024;

type Shared = Arc<Mutex<OnlineSession>>;

#[derive(Default)]
pub struct AppState {
    sessions: Mutex<HashMap<Uuid, Shared>>,
}

impl AppState {
    fn session(&self, id: &str) -> Result<(Uuid, Shared), ApiError> {
        let key = Uuid::parse_str(id).map_err(|_| ApiError::not_found(format!("no session {id}")))?;
        let map = self.sessions.lock().expect("session map poisoned");
        map.get(&key).cloned().map(|s| (key, s)).ok_or_else(|| ApiError::not_found(format!("no session {id}")))
    }
}

/// JSON body whose rejections come back as [`ErrorBody`].
pub struct ApiJson<T>(pub T);

impl<S, T> FromRequest<S> for ApiJson<T>
where
    T: DeserializeOwned,
    S: Send + Sync,
{
    type Rejection = ApiError;

    async fn from_request(req: Request, state: &S) -> Result<Self, Self::Rejection> {
        match Json::<T>::from_request(req, state).await {
            Ok(Json(v)) => Ok(Self(v)),
            Err(JsonRejection::JsonDataError(e)) => Err(ApiError::new(ErrorKind::Config, e.body_text())),
            Err(e) => Err(ApiError::new(ErrorKind::Input, e.body_text())),
        }
    }
}

pub fn router(state: Arc<AppState>) -> Router {
    Router::new()
        .route(HEALTH, get(health))
        .route(EXPERIMENTS, post(run))
        .route(SUMMARIZE, post(summarize_reports))
        .route(ORACLE_COST, post(cost))
        .route(DATASETS, post(dataset))
        .route(SESSIONS, post(create_session))
        .route(&format!("{SESSIONS}/{{id}}"), get(get_session).delete(delete_session))
        .route(&format!("{SESSIONS}/{{id}}/samples"), post(push_samples))
        .layer(DefaultBodyLimit::max(BODY_LIMIT))
        .with_state(state)
}

/// Serves until the listener fails.
pub async fn serve(listener: TcpListener) -> std::io::Result<()> {
    axum::serve(listener, router(Arc::new(AppState::default()))).await
}

#[derive(Serialize)]
struct Health {
    status: &'static str,
    version: &'static str,
}

async fn health() -> Json<Health> {
    Json(Health { status: "ok", version: env!("CARGO_PKG_VERSION") })
}

fn prepared(mut config: ExperimentConfig, overrides: &Overrides) -> Result<ExperimentConfig, ApiError> {
    overrides.apply(&mut config);
    config.validate()?;
    Ok(config)
}

async fn blocking<T: Send + 'static>(
    f: impl FnOnce() -> Result<T, ApiError> + Send + 'static,
) -> Result<T, ApiError> {
    tokio::task::spawn_blocking(f).await?
}

async fn run(ApiJson(req): ApiJson<RunRequest>) -> Result<Json<RunResponse>, ApiError> {
    let config = prepared(req.config, &req.overrides)?;
    tracing::info!(replications = config.replications, samples = config.samples, "experiment");
    blocking(move || {
        let reports = run_experiment(&config)?;
        let summary = summarize(&reports)?;
        Ok(Json(RunResponse { reports, summary }))
    })
    .await
}

async fn summarize_reports(ApiJson(req): ApiJson<SummarizeRequest>) -> Result<Json<wiener_core::harness::Summary>, ApiError> {
    Ok(Json(summarize(&req.reports)?))
}

async fn cost(ApiJson(req): ApiJson<CostRequest>) -> Result<Json<CostResponse>, ApiError> {
    let config = prepared(req.config, &req.overrides)?;
    let model = config.model();
    if req.theta.len() != model.dim() {
        return Err(ApiError::new(
            ErrorKind::Input,
            format!("theta has {} entries, the model has {} ({})", req.theta.len(), model.dim(), model.param_names.join(", ")),
        ));
    }
    blocking(move || {
        let seed = replication_seed(config.seed, req.replication);
        let data = config.scenario.generate(config.samples, seed)?;
        let paths = config.effective_paths();
        let cost = offline_cost(&model, &req.theta, &data, paths, seed)?;
        let estimating_vector = mean_estimating_vector(&model, &req.theta, &data, paths, seed)?;
        Ok(Json(CostResponse {
            cost,
            estimating_vector,
            param_names: model.param_names.clone(),
            samples: data.len(),
            paths,
            seed,
        }))
    })
    .await
}

async fn dataset(ApiJson(req): ApiJson<DatasetRequest>) -> Result<Json<DatasetResponse>, ApiError> {
    req.scenario.validate()?;
    blocking(move || Ok(Json(DatasetResponse { records: req.scenario.generate(req.samples, req.seed)?.records }))).await
}

fn info(id: Uuid, s: &OnlineSession) -> SessionInfo {
    SessionInfo {
        id: id.to_string(),
        param_names: s.model().param_names.clone(),
        theta0: s.theta0().to_vec(),
        theta: s.theta().to_vec(),
        samples_seen: s.samples_seen(),
        resets: s.resets(),
    }
}

async fn create_session(
    State(state): State<Arc<AppState>>,
    ApiJson(req): ApiJson<CreateSession>,
) -> Result<(StatusCode, Json<SessionInfo>), ApiError> {
    let config = prepared(req.config, &Overrides::default())?;
    let seed = replication_seed(config.seed, req.replication);
    let theta0 = match req.theta0 {
        Some(t) => t,
        None => config.project_to_model(&initial_theta(&config, seed)?),
    };
    let session = OnlineSession::new(&config, config.model(), config.scenario.input_mode(seed), theta0, seed)?;
    let id = Uuid::new_v4();
    let body = info(id, &session);
    state.sessions.lock().expect("session map poisoned").insert(id, Arc::new(Mutex::new(session)));
    tracing::info!(%id, "session created");
    Ok((StatusCode::CREATED, Json(body)))
}

async fn get_session(State(state): State<Arc<AppState>>, Path(id): Path<String>) -> Result<Json<SessionInfo>, ApiError> {
    let (key, session) = state.session(&id)?;
    let s = session.lock().expect("session poisoned");
    Ok(Json(info(key, &s)))
}

async fn push_samples(
    State(state): State<Arc<AppState>>,
    Path(id): Path<String>,
    ApiJson(req): ApiJson<PushSamples>,
) -> Result<Json<PushResponse>, ApiError> {
    let (key, session) = state.session(&id)?;
    blocking(move || {
        let mut s = session.lock().expect("session poisoned");
        let rows = req
            .samples
            .iter()
            .map(|x| s.push(x.t, x.u, x.y))
            .collect::<wiener_core::Result<Vec<_>>>()?;
        Ok(Json(PushResponse { rows, session: info(key, &s) }))
    })
    .await
}

async fn delete_session(State(state): State<Arc<AppState>>, Path(id): Path<String>) -> Result<StatusCode, ApiError> {
    let (key, _) = state.session(&id)?;
    state.sessions.lock().expect("session map poisoned").remove(&key);
    Ok(StatusCode::NO_CONTENT)
}
