//! JSON-over-HTTP facade over [`Engine`].
//!
//! | method | path        | body                | response          |
//! |--------|-------------|---------------------|-------------------|
//! | GET    | `/sets`     |                     | `[SetInfo]`       |
//! | GET    | `/meta`     |                     | `Meta`            |
//! | POST   | `/analyze`  | `ScenarioRequest`   | `AnalysisJson`    |
//! | POST   | `/compare`  | `CompareRequest`    | `CompareJson`     |
//! | POST   | `/svi-hist` | `SviHistRequest`    | `SviHistJson`     |
//!
//! Every route answers 503 until the store has been loaded.

use std::net::SocketAddr;
use std::path::PathBuf;
use std::sync::{Arc, OnceLock};

use axum::body::Bytes;
use axum::extract::State;
use axum::http::{header, StatusCode};
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post};
use axum::Router;
use serde::de::DeserializeOwned;
use serde::Serialize;
use serde_json::json;

use crate::engine::{CompareRequest, Engine, EngineError, FieldError, ScenarioRequest, SviHistRequest};
use crate::store::Store;

/// Shared service state; the engine is installed once the store has loaded.
#[derive(Debug, Default)]
pub struct ServiceState {
    engine: OnceLock<Arc<Engine>>,
    load_error: OnceLock<String>,
}

impl ServiceState {
    pub fn loading() -> Arc<Self> {
        Arc::new(ServiceState::default())
    }

    pub fn ready(engine: Engine) -> Arc<Self> {
        let state = ServiceState::default();
        let _ = state.engine.set(Arc::new(engine));
        Arc::new(state)
    }

    /// Installs the engine; later calls are ignored.
    pub fn set_engine(&self, engine: Engine) {
        let _ = self.engine.set(Arc::new(engine));
    }

    pub fn set_load_error(&self, message: String) {
        let _ = self.load_error.set(message);
    }

    #[allow(clippy::result_large_err)]
    fn engine(&self) -> Result<Arc<Engine>, Response> {
        match (self.engine.get(), self.load_error.get()) {
            (Some(e), _) => Ok(e.clone()),
            (None, Some(msg)) => Err(error(StatusCode::SERVICE_UNAVAILABLE, format!("store failed to load: {msg}"))),
            (None, None) => Err(error(StatusCode::SERVICE_UNAVAILABLE, "store is still loading".to_string())),
        }
    }
}

fn json_response<T: Serialize>(status: StatusCode, value: &T) -> Response {
    match serde_json::to_vec(value) {
        Ok(body) => (status, [(header::CONTENT_TYPE, "application/json")], body).into_response(),
        Err(e) => error(StatusCode::INTERNAL_SERVER_ERROR, e.to_string()),
    }
}

fn error(status: StatusCode, message: String) -> Response {
    json_response(status, &json!({ "error": message }))
}

fn invalid(fields: Vec<FieldError>) -> Response {
    json_response(StatusCode::BAD_REQUEST, &json!({ "error": "invalid request", "fields": fields }))
}

fn engine_error(e: EngineError) -> Response {
    match e {
        EngineError::Invalid(fields) => invalid(fields),
        EngineError::UnknownSet(name) => json_response(
            StatusCode::NOT_FOUND,
            &json!({ "error": format!("unknown facility set {name:?}"), "set": name }),
        ),
        other => error(StatusCode::INTERNAL_SERVER_ERROR, other.to_string()),
    }
}

#[allow(clippy::result_large_err)]
fn parse_body<T: DeserializeOwned>(body: &Bytes) -> Result<T, Response> {
    let de = &mut serde_json::Deserializer::from_slice(body);
    serde_path_to_error::deserialize(de).map_err(|e| {
        let path = e.path().to_string();
        let field = if path == "." { "body".to_string() } else { path };
        invalid(vec![FieldError { field, message: e.inner().to_string() }])
    })
}

async fn run<T, R, F>(state: Arc<ServiceState>, body: Bytes, f: F) -> Response
where
    T: DeserializeOwned + Send + 'static,
    R: Serialize + Send + 'static,
    F: FnOnce(&Engine, &T) -> Result<R, EngineError> + Send + 'static,
{
    let engine = match state.engine() {
        Ok(e) => e,
        Err(r) => return r,
    };
    let req: T = match parse_body(&body) {
        Ok(r) => r,
        Err(r) => return r,
    };
    match tokio::task::spawn_blocking(move || f(&engine, &req)).await {
        Ok(Ok(out)) => json_response(StatusCode::OK, &out),
        Ok(Err(e)) => engine_error(e),
        Err(e) => error(StatusCode::INTERNAL_SERVER_ERROR, e.to_string()),
    }
}

async fn sets(State(state): State<Arc<ServiceState>>) -> Response {
    match state.engine() {
        Ok(e) => json_response(StatusCode::OK, &e.sets()),
        Err(r) => r,
    }
}

async fn meta(State(state): State<Arc<ServiceState>>) -> Response {
    match state.engine() {
        Ok(e) => json_response(StatusCode::OK, &e.meta()),
        Err(r) => r,
    }
}

async fn analyze(State(state): State<Arc<ServiceState>>, body: Bytes) -> Response {
    run(state, body, |e: &Engine, r: &ScenarioRequest| e.analyze(r).map(|a| a.to_json())).await
}

async fn compare(State(state): State<Arc<ServiceState>>, body: Bytes) -> Response {
    run(state, body, |e: &Engine, r: &CompareRequest| e.compare(r).map(|c| c.to_json())).await
}

async fn svi_hist(State(state): State<Arc<ServiceState>>, body: Bytes) -> Response {
    run(state, body, |e: &Engine, r: &SviHistRequest| e.svi_hist(r).map(|h| h.to_json())).await
}

pub fn router(state: Arc<ServiceState>) -> Router {
    Router::new()
        .route("/sets", get(sets))
        .route("/meta", get(meta))
        .route("/analyze", post(analyze))
        .route("/compare", post(compare))
        .route("/svi-hist", post(svi_hist))
        .with_state(state)
}

/// Binds `addr`, loads the store in the background and serves until Ctrl-C.
pub async fn serve(addr: SocketAddr, store: PathBuf, jobs: Option<usize>) -> anyhow::Result<()> {
    let state = ServiceState::loading();
    let loader = state.clone();
    tokio::task::spawn_blocking(move || {
        match Store::load(&store).map_err(|e| e.to_string()).and_then(|s| {
            Engine::new(Arc::new(s), jobs).map_err(|e| e.to_string())
        }) {
            Ok(engine) => {
                tracing::info!(store = %store.display(), "store loaded");
                loader.set_engine(engine);
            }
            Err(msg) => {
                tracing::error!(store = %store.display(), "{msg}");
                loader.set_load_error(msg);
            }
        }
    });
    let listener = tokio::net::TcpListener::bind(addr).await?;
    tracing::info!("listening on {}", listener.local_addr()?);
    axum::serve(listener, router(state))
        .with_graceful_shutdown(async {
            let _ = tokio::signal::ctrl_c().await;
        })
        .await?;
    Ok(())
}
