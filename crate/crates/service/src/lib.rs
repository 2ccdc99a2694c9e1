//! HTTP API for case scoring and risk-map data.
//!
//! Endpoints, all JSON:
//!
//! - `POST /api/score`: score one case with the loaded model.
//! - `GET /api/map?type=<category>`: village GeoJSON for a category or all cases.
//! - `GET /api/district/<id>`: district overview.
//! - `GET /api/health`: what is loaded.
//! - `POST /api/reload`: reload model and aggregates from disk (loopback only
//!   unless configured otherwise).
//!
//! There is no authentication.

pub mod score;

use std::collections::BTreeMap;
use std::fs;
use std::net::SocketAddr;
use std::path::{Path, PathBuf};
use std::sync::{Arc, RwLock};

use axum::body::Bytes;
use axum::extract::{ConnectInfo, Path as UrlPath, Query, State};
use axum::http::{header, HeaderMap, HeaderValue, Request, StatusCode};
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post};
use axum::{Json, Router};
use dvrisk_core::forest::{EnsembleModel, ForestError};
use dvrisk_core::geo::{export_geojson, AggregateBundle, Boundaries, CaseType, GeoError};
use serde::Deserialize;
use serde_json::{json, Value};
use sha2::{Digest, Sha256};
use thiserror::Error;

pub use score::{parse_request, ScoreResponse};

pub const DEFAULT_LISTEN: &str = "127.0.0.1:8645";

#[derive(Debug, Error)]
pub enum ServiceError {
    #[error("reading {path}: {source}")]
    Io {
        path: PathBuf,
        source: std::io::Error,
    },
    #[error("model {path}: {source}")]
    Model { path: PathBuf, source: ForestError },
    #[error("aggregates {path}: {source}")]
    Aggregates {
        path: PathBuf,
        source: serde_json::Error,
    },
    #[error(transparent)]
    Geo(#[from] GeoError),
    #[error("listening on {addr}: {source}")]
    Listen {
        addr: SocketAddr,
        source: std::io::Error,
    },
}

#[derive(Debug, Clone)]
pub struct ServiceConfig {
    pub listen: SocketAddr,
    pub model_path: Option<PathBuf>,
    pub aggregates_path: Option<PathBuf>,
    /// Synthetic grid when unset.
    pub boundaries_path: Option<PathBuf>,
    pub allow_remote_reload: bool,
}

impl Default for ServiceConfig {
    fn default() -> Self {
        ServiceConfig {
            listen: DEFAULT_LISTEN.parse().expect("valid default address"),
            model_path: None,
            aggregates_path: None,
            boundaries_path: None,
            allow_remote_reload: false,
        }
    }
}

struct MapBody {
    body: String,
    etag: String,
}

/// Everything a request reads. Replaced whole on reload.
pub struct Snapshot {
    model: Option<(EnsembleModel, String)>,
    aggregates: Option<AggregateBundle>,
    /// Keyed by `all` or a category name.
    maps: BTreeMap<String, MapBody>,
}

fn read(path: &Path) -> Result<Vec<u8>, ServiceError> {
    fs::read(path).map_err(|source| ServiceError::Io {
        path: path.to_path_buf(),
        source,
    })
}

impl Snapshot {
    pub fn empty() -> Snapshot {
        Snapshot {
            model: None,
            aggregates: None,
            maps: BTreeMap::new(),
        }
    }

    pub fn new(
        model: Option<EnsembleModel>,
        aggregates: Option<AggregateBundle>,
        boundaries: &Boundaries,
    ) -> Result<Snapshot, ServiceError> {
        let mut maps = BTreeMap::new();
        if let Some(bundle) = &aggregates {
            let views = std::iter::once(("all".to_string(), None))
                .chain(CaseType::ALL.iter().map(|c| (c.as_str().to_string(), Some(*c))));
            for (key, category) in views {
                let body = export_geojson(bundle.view(category), boundaries)?;
                let etag = format!("\"{}\"", hex::encode(Sha256::digest(body.as_bytes())));
                maps.insert(key, MapBody { body, etag });
            }
        }
        Ok(Snapshot {
            model: model.map(|m| {
                let v = m.version();
                (m, v)
            }),
            aggregates,
            maps,
        })
    }

    pub fn load(config: &ServiceConfig) -> Result<Snapshot, ServiceError> {
        let model = match &config.model_path {
            Some(p) => Some(EnsembleModel::from_json(&read(p)?).map_err(|source| ServiceError::Model {
                path: p.clone(),
                source,
            })?),
            None => None,
        };
        let aggregates = match &config.aggregates_path {
            Some(p) => Some(serde_json::from_slice(&read(p)?).map_err(|source| {
                ServiceError::Aggregates {
                    path: p.clone(),
                    source,
                }
            })?),
            None => None,
        };
        let boundaries = match &config.boundaries_path {
            Some(p) => Boundaries::from_geojson(&String::from_utf8_lossy(&read(p)?))?,
            None => Boundaries::synthetic(),
        };
        Snapshot::new(model, aggregates, &boundaries)
    }

    pub fn model_version(&self) -> Option<&str> {
        self.model.as_ref().map(|(_, v)| v.as_str())
    }
}

pub struct AppState {
    config: ServiceConfig,
    current: RwLock<Arc<Snapshot>>,
}

impl AppState {
    pub fn new(config: ServiceConfig, snapshot: Snapshot) -> Arc<AppState> {
        Arc::new(AppState {
            config,
            current: RwLock::new(Arc::new(snapshot)),
        })
    }

    pub fn snapshot(&self) -> Arc<Snapshot> {
        self.current.read().expect("state lock poisoned").clone()
    }

    /// Loads fresh state from the configured paths and swaps it in. On
    /// failure the old state stays.
    pub fn reload(&self) -> Result<Arc<Snapshot>, ServiceError> {
        let fresh = Arc::new(Snapshot::load(&self.config)?);
        *self.current.write().expect("state lock poisoned") = fresh.clone();
        Ok(fresh)
    }
}

fn error(status: StatusCode, message: impl Into<String>) -> Response {
    (status, Json(json!({"error": message.into()}))).into_response()
}

async fn score(State(state): State<Arc<AppState>>, body: Bytes) -> Response {
    let snap = state.snapshot();
    let Some((model, version)) = &snap.model else {
        return error(StatusCode::SERVICE_UNAVAILABLE, "no model loaded");
    };
    let record = match parse_request(&body, &model.schema().feature_list()) {
        Ok(r) => r,
        Err(fields) => {
            return (
                StatusCode::BAD_REQUEST,
                Json(json!({"error": "invalid request", "fields": fields})),
            )
                .into_response()
        }
    };
    match model.predict_record(&record) {
        Ok(p) => {
            let c = model.classify(p);
            Json(ScoreResponse {
                probability: p,
                label: c.label,
                risk_level: c.risk_level.as_str(),
                model_version: version.clone(),
            })
            .into_response()
        }
        Err(e) => error(StatusCode::BAD_REQUEST, e.to_string()),
    }
}

#[derive(Deserialize)]
struct MapQuery {
    #[serde(rename = "type")]
    category: Option<String>,
}

fn valid_categories() -> Vec<&'static str> {
    std::iter::once("all").chain(CaseType::ALL.iter().map(|c| c.as_str())).collect()
}

async fn map(State(state): State<Arc<AppState>>, Query(q): Query<MapQuery>, headers: HeaderMap) -> Response {
    let snap = state.snapshot();
    let key = q.category.unwrap_or_else(|| "all".to_string());
    if !valid_categories().contains(&key.as_str()) {
        return (
            StatusCode::BAD_REQUEST,
            Json(json!({
                "error": format!("unknown category `{key}`"),
                "valid_categories": valid_categories(),
            })),
        )
            .into_response();
    }
    let Some(m) = snap.maps.get(&key) else {
        return error(StatusCode::SERVICE_UNAVAILABLE, "no aggregates loaded");
    };
    let etag = HeaderValue::from_str(&m.etag).expect("hex etag is a valid header");
    if headers.get(header::IF_NONE_MATCH) == Some(&etag) {
        return (StatusCode::NOT_MODIFIED, [(header::ETAG, etag)]).into_response();
    }
    (
        [
            (header::CONTENT_TYPE, HeaderValue::from_static("application/geo+json")),
            (header::ETAG, etag),
        ],
        m.body.clone(),
    )
        .into_response()
}

async fn district(State(state): State<Arc<AppState>>, UrlPath(id): UrlPath<String>) -> Response {
    let snap = state.snapshot();
    let Some(bundle) = &snap.aggregates else {
        return error(StatusCode::SERVICE_UNAVAILABLE, "no aggregates loaded");
    };
    let Some(d) = bundle.all.district(&id) else {
        return error(StatusCode::NOT_FOUND, format!("unknown district `{id}`"));
    };
    let t = d.tally;
    let share = |x: u64| if t.total == 0 { 0.0 } else { x as f64 / t.total as f64 };
    Json(json!({
        "district_id": d.district_id,
        "n_villages": d.n_villages,
        "total": t.total,
        "case_types": {
            "IPV": t.ipv,
            "child_adolescent": t.child_adolescent,
            "elderly": t.elderly,
            "intersibling_other": t.intersibling_other,
        },
        "case_type_share": {
            "IPV": share(t.ipv),
            "child_adolescent": share(t.child_adolescent),
            "elderly": share(t.elderly),
            "intersibling_other": share(t.intersibling_other),
        },
        "gender": {"male": t.male, "female": t.female, "female_share": share(t.female)},
        "age": {"0-18": t.age_0_18, "19-64": t.age_19_64, "65+": t.age_65_plus},
        "low_mid_income": t.low_mid_income,
        "disability_or_mental_illness": t.disability_or_mental_illness,
        "predicted_high_risk": t.predicted_high_risk,
    }))
    .into_response()
}

fn health_body(snap: &Snapshot) -> Value {
    json!({
        "model_loaded": snap.model.is_some(),
        "model_version": snap.model_version(),
        "aggregates_loaded": snap.aggregates.is_some(),
        "categories": valid_categories(),
    })
}

async fn health(State(state): State<Arc<AppState>>) -> Response {
    Json(health_body(&state.snapshot())).into_response()
}

async fn reload(State(state): State<Arc<AppState>>, request: Request<axum::body::Body>) -> Response {
    let peer = request
        .extensions()
        .get::<ConnectInfo<SocketAddr>>()
        .map(|c| c.0.ip());
    let local = peer.is_some_and(|ip| ip.is_loopback());
    if !local && !state.config.allow_remote_reload {
        return error(StatusCode::FORBIDDEN, "reload is only accepted from localhost");
    }
    match state.reload() {
        Ok(snap) => {
            log::info!("reloaded; model version {:?}", snap.model_version());
            Json(health_body(&snap)).into_response()
        }
        Err(e) => {
            log::error!("reload failed: {e}");
            error(StatusCode::INTERNAL_SERVER_ERROR, format!("reload failed, previous state kept: {e}"))
        }
    }
}

pub fn router(state: Arc<AppState>) -> Router {
    Router::new()
        .route("/api/score", post(score))
        .route("/api/map", get(map))
        .route("/api/district/{id}", get(district))
        .route("/api/health", get(health))
        .route("/api/reload", post(reload))
        .with_state(state)
}

/// Loads state from `config` and serves until Ctrl-C.
pub async fn serve(config: ServiceConfig) -> Result<(), ServiceError> {
    let snapshot = Snapshot::load(&config)?;
    let listen = config.listen;
    let app = router(AppState::new(config, snapshot));
    let listener = tokio::net::TcpListener::bind(listen)
        .await
        .map_err(|source| ServiceError::Listen { addr: listen, source })?;
    log::info!("listening on http://{listen}");
    axum::serve(listener, app.into_make_service_with_connect_info::<SocketAddr>())
        .with_graceful_shutdown(async {
            let _ = tokio::signal::ctrl_c().await;
        })
        .await
        .map_err(|source| ServiceError::Listen { addr: listen, source })
}
