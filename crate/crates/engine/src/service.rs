//! HTTP service: `POST /v1/query`, `GET /v1/indexes`, `GET /healthz`.

use std::collections::BTreeMap;
use std::net::SocketAddr;
use std::path::Path;
use std::sync::atomic::{AtomicU64, Ordering};
use std::sync::Arc;

use anyhow::{Context, Result};
use axum::body::Bytes;
use axum::extract::State;
use axum::http::{header, StatusCode};
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post};
use axum::Router;
use infgram_core::index::DEFAULT_TERM_CEILING;
use serde::Deserialize;
use serde_json::Value;

use crate::api::{self, ApiError, ExecOptions, QueryRequest, DEFAULT_SNIPPET_TOKENS, SCHEMA_VERSION};
use crate::store::{parse_index_list, CorpusIndex};

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(untagged)]
pub enum IndexSpec {
    /// `dir` or `a,-b`.
    List(String),
    Dirs(Vec<String>),
}

impl IndexSpec {
    fn joined(&self) -> String {
        match self {
            IndexSpec::List(s) => s.clone(),
            IndexSpec::Dirs(v) => v.join(","),
        }
    }
}

fn default_bind() -> String {
    "127.0.0.1:8080".into()
}

fn default_ceiling() -> u64 {
    DEFAULT_TERM_CEILING
}

fn default_snippet() -> usize {
    DEFAULT_SNIPPET_TOKENS
}

/// Service configuration, read from TOML:
///
/// ```toml
/// bind = "127.0.0.1:8080"
/// term_ceiling = 500000
/// snippet_tokens = 256
///
/// [indexes]
/// toy = "/data/toy"
/// cleaned = ["/data/all", "-/data/contaminated"]
/// ```
#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ServiceConfig {
    #[serde(default = "default_bind")]
    pub bind: String,
    #[serde(default = "default_ceiling")]
    pub term_ceiling: u64,
    #[serde(default = "default_snippet")]
    pub snippet_tokens: usize,
    pub indexes: BTreeMap<String, IndexSpec>,
}

impl ServiceConfig {
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
        toml::from_str(&text).with_context(|| format!("parsing {}", path.display()))
    }
}

#[derive(Debug, Default)]
pub struct Counters {
    pub requests: AtomicU64,
    pub errors: AtomicU64,
}

pub struct AppState {
    pub indexes: BTreeMap<String, CorpusIndex>,
    pub opts: ExecOptions,
    pub counters: Counters,
    index_list: String,
}

impl AppState {
    pub fn open(cfg: &ServiceConfig) -> Result<Self> {
        let mut indexes = BTreeMap::new();
        for (name, spec) in &cfg.indexes {
            let dirs = parse_index_list(&spec.joined())?;
            let ci = CorpusIndex::open_with_ceiling(&dirs, cfg.term_ceiling).with_context(|| format!("index {name}"))?;
            indexes.insert(name.clone(), ci);
        }
        Ok(Self::new(indexes, ExecOptions { snippet_tokens: cfg.snippet_tokens }))
    }

    pub fn new(indexes: BTreeMap<String, CorpusIndex>, opts: ExecOptions) -> Self {
        let list: Vec<Value> = indexes
            .iter()
            .map(|(name, ci)| serde_json::json!({ "name": name, "stats": ci.stats() }))
            .collect();
        let index_list = serde_json::json!({ "v": SCHEMA_VERSION, "indexes": list }).to_string();
        Self { indexes, opts, counters: Counters::default(), index_list }
    }

    fn resolve(&self, name: Option<&str>) -> Result<(&str, &CorpusIndex), ApiError> {
        match name {
            Some(n) => self
                .indexes
                .get_key_value(n)
                .map(|(k, v)| (k.as_str(), v))
                .ok_or_else(|| ApiError::UnknownIndex(n.to_string())),
            None if self.indexes.len() == 1 => {
                let (k, v) = self.indexes.iter().next().unwrap();
                Ok((k.as_str(), v))
            }
            None => Err(ApiError::BadRequest { field: Some("index"), message: "index is required".into() }),
        }
    }

    /// Handle one request body; returns the status and the JSON response.
    pub fn handle(&self, body: &[u8]) -> (u16, String) {
        self.counters.requests.fetch_add(1, Ordering::Relaxed);
        let out = serde_json::from_slice::<QueryRequest>(body)
            .map_err(|e| ApiError::BadRequest { field: None, message: format!("malformed request: {e}") })
            .and_then(|req| {
                let (name, ci) = self.resolve(req.index.as_deref())?;
                let (res, ms) = api::execute_timed(ci, &req, &self.opts);
                res.map(|r| api::envelope(req.query_type, name, r, ms))
            });
        match out {
            Ok(v) => (200, v.to_string()),
            Err(e) => {
                self.counters.errors.fetch_add(1, Ordering::Relaxed);
                (e.status(), api::error_envelope(&e).to_string())
            }
        }
    }
}

fn json(status: u16, body: String) -> Response {
    let status = StatusCode::from_u16(status).unwrap_or(StatusCode::INTERNAL_SERVER_ERROR);
    (status, [(header::CONTENT_TYPE, "application/json")], body).into_response()
}

async fn query(State(state): State<Arc<AppState>>, body: Bytes) -> Response {
    let (status, body) = match tokio::task::spawn_blocking(move || state.handle(&body)).await {
        Ok(r) => r,
        Err(e) => (500, api::error_envelope(&ApiError::Internal(e.to_string())).to_string()),
    };
    json(status, body)
}

async fn indexes(State(state): State<Arc<AppState>>) -> Response {
    json(200, state.index_list.clone())
}

async fn healthz(State(state): State<Arc<AppState>>) -> Response {
    let c = &state.counters;
    let body = serde_json::json!({
        "status": "ok",
        "requests": c.requests.load(Ordering::Relaxed),
        "errors": c.errors.load(Ordering::Relaxed),
    });
    json(200, body.to_string())
}

pub fn router(state: Arc<AppState>) -> Router {
    Router::new()
        .route("/v1/query", post(query))
        .route("/v1/indexes", get(indexes))
        .route("/healthz", get(healthz))
        .with_state(state)
}

/// Bind and serve in the background; returns the bound address.
pub async fn spawn(state: Arc<AppState>, bind: &str) -> Result<(SocketAddr, tokio::task::JoinHandle<()>)> {
    let listener = tokio::net::TcpListener::bind(bind).await.with_context(|| format!("binding {bind}"))?;
    let addr = listener.local_addr()?;
    let app = router(state);
    let handle = tokio::spawn(async move {
        let _ = axum::serve(listener, app).await;
    });
    Ok((addr, handle))
}

/// Serve until interrupted.
pub async fn serve(state: Arc<AppState>, bind: &str) -> Result<()> {
    let listener = tokio::net::TcpListener::bind(bind).await.with_context(|| format!("binding {bind}"))?;
    eprintln!("listening on {}", listener.local_addr()?);
    axum::serve(listener, router(state))
        .with_graceful_shutdown(async {
            let _ = tokio::signal::ctrl_c().await;
        })
        .await?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn config_parsing() {
        let cfg: ServiceConfig = toml::from_str(
            "bind = \"0.0.0.0:9\"\n[indexes]\ntoy = \"/a\"\ndiff = [\"/a\", \"-/b\"]\n",
        )
        .unwrap();
        assert_eq!(cfg.bind, "0.0.0.0:9");
        assert_eq!(cfg.term_ceiling, DEFAULT_TERM_CEILING);
        assert_eq!(cfg.indexes["diff"].joined(), "/a,-/b");
        assert!(toml::from_str::<ServiceConfig>("bogus = 1\n[indexes]\n").is_err());
    }
}
