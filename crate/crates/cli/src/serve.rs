//! `bdps serve`: the gateway HTTP API over file-backed local and remote
//! registries in one process.
//!
//! Layout under `data_dir`: `local/` and `remote/` registry directories,
//! `ledger.jsonl` for metered usage and `mirror.json` for the mirror's
//! role, epoch and fork point.

use std::fs;
use std::io::Write as _;
use std::net::SocketAddr;
use std::path::{Path, PathBuf};
use std::sync::{Arc, Mutex};
use std::time::{Duration, SystemTime, UNIX_EPOCH};

use axum::body::Bytes;
use axum::extract::State;
use axum::http::{header, HeaderMap, Method, StatusCode, Uri};
use axum::response::{IntoResponse, Response};
use axum::Router;
use bdps_core::gateway::auth::Principal;
use bdps_core::gateway::billing::{BillingError, UsageLedger};
use bdps_core::gateway::service::{is_write, ApiRequest, ApiResponse, Gateway, GatewayConfig, ResponseBody};
use bdps_core::registry::{Registry, RegistryError};
use bdps_core::replication::{Mirror, ReplicatedPair, ReplicationMode, Role};
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};
use thiserror::Error;

use crate::config::{Config, ConfigError};

#[derive(Debug, Error)]
pub enum ServeError {
    #[error("address in use: {0}")]
    AddressInUse(String),
    #[error("cannot listen on {addr}: {source}")]
    Bind { addr: String, source: std::io::Error },
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error("registry: {0}")]
    Registry(#[from] RegistryError),
    #[error("ledger: {0}")]
    Billing(#[from] BillingError),
    #[error("{0}")]
    Io(#[from] std::io::Error),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct MirrorMeta {
    pub role: Role,
    pub epoch: u32,
    pub fork_seq: u64,
}

impl Default for MirrorMeta {
    fn default() -> Self {
        MirrorMeta { role: Role::LocalPrimary, epoch: 1, fork_seq: 0 }
    }
}

impl MirrorMeta {
    fn of(pair: &ReplicatedPair) -> Self {
        MirrorMeta { role: pair.role(), epoch: pair.remote.epoch(), fork_seq: pair.remote.fork_seq() }
    }

    fn path(data_dir: &Path) -> PathBuf {
        data_dir.join("mirror.json")
    }

    pub fn load(data_dir: &Path) -> Result<Self, ServeError> {
        let path = Self::path(data_dir);
        if !path.exists() {
            return Ok(MirrorMeta::default());
        }
        let text = fs::read_to_string(&path)?;
        serde_json::from_str(&text)
            .map_err(|e| ServeError::Io(std::io::Error::new(std::io::ErrorKind::InvalidData, format!("{}: {e}", path.display()))))
    }

    /// Written to a temp file and renamed so a crash never leaves half a file.
    pub fn store(&self, data_dir: &Path) -> Result<(), ServeError> {
        let path = Self::path(data_dir);
        let tmp = path.with_extension("json.tmp");
        let mut f = fs::File::create(&tmp)?;
        f.write_all(serde_json::to_string(self).expect("meta serializes").as_bytes())?;
        f.sync_all()?;
        fs::rename(tmp, path)?;
        Ok(())
    }
}

/// Opens both registries and the mirror state under `data_dir`.
pub fn open_pair(data_dir: &Path, mode: ReplicationMode) -> Result<ReplicatedPair, ServeError> {
    let local = Registry::open(data_dir.join("local"))?;
    let remote = Registry::open(data_dir.join("remote"))?;
    let meta = MirrorMeta::load(data_dir)?;
    let mirror = Mirror::with_epoch(remote, meta.role, meta.epoch, meta.fork_seq);
    Ok(ReplicatedPair::new(local, mirror, mode))
}

pub fn now_ms() -> u64 {
    SystemTime::now().duration_since(UNIX_EPOCH).map_or(0, |d| d.as_millis() as u64)
}

struct Shared {
    gateway: Mutex<Gateway>,
    data_dir: PathBuf,
    meta: Mutex<MirrorMeta>,
}

impl Shared {
    fn persist_meta(&self, gateway: &Gateway) {
        let now = MirrorMeta::of(gateway.pair());
        let mut last = self.meta.lock().expect("meta lock");
        if *last != now {
            match now.store(&self.data_dir) {
                Ok(()) => *last = now,
                Err(e) => eprintln!("bdps: cannot record mirror state: {e}"),
            }
        }
    }
}

pub fn build_gateway(config: &Config) -> Result<Gateway, ServeError> {
    config.prepare_data_dir()?;
    let pair = open_pair(&config.data_dir, config.replication_mode)?;
    let ledger = UsageLedger::open(config.data_dir.join("ledger.jsonl"), config.fees.clone())?;
    let gw_config = GatewayConfig {
        policy: config.policy,
        detector: config.detector,
        session_ttl_ms: config.session_ttl_ms,
        seed: rand::random(),
    };
    let mut gateway = Gateway::new(pair, ledger, gw_config).map_err(|e| ConfigError::Invalid(e.to_string()))?;
    for a in &config.accounts {
        let principal: Principal = a.principal.parse().map_err(ConfigError::Invalid)?;
        gateway.add_account(principal, &a.secret);
    }
    Ok(gateway)
}

fn to_response(resp: ApiResponse) -> Response {
    let status = StatusCode::from_u16(resp.status).unwrap_or(StatusCode::INTERNAL_SERVER_ERROR);
    match resp.body {
        ResponseBody::Json(v) => (status, [(header::CONTENT_TYPE, "application/json")], v.to_string()).into_response(),
        ResponseBody::Csv(s) => (status, [(header::CONTENT_TYPE, "text/csv")], s).into_response(),
    }
}

async fn handle(State(shared): State<Arc<Shared>>, method: Method, uri: Uri, headers: HeaderMap, body: Bytes) -> Response {
    let body = if body.is_empty() {
        Value::Null
    } else {
        match serde_json::from_slice(&body) {
            Ok(v) => v,
            Err(e) => {
                let err = json!({ "error": "bad_request", "message": format!("body is not JSON: {e}") });
                return (StatusCode::BAD_REQUEST, [(header::CONTENT_TYPE, "application/json")], err.to_string()).into_response();
            }
        }
    };
    let path = uri.path_and_query().map_or(uri.path(), |p| p.as_str());
    let mut req = ApiRequest::new(method.as_str(), path).with_body(body);
    let bearer = headers.get(header::AUTHORIZATION).and_then(|v| v.to_str().ok()).and_then(|v| v.strip_prefix("Bearer "));
    if let Some(token) = bearer {
        req = req.with_token(token.trim());
    }
    let resp = tokio::task::spawn_blocking(move || {
        let now = now_ms();
        // admission is booked before dispatch so concurrent requests see the queue
        let admission = shared.gateway.lock().expect("gateway lock").admit(is_write(&req), now);
        let mut gateway = shared.gateway.lock().expect("gateway lock");
        let resp = gateway.dispatch(&req, admission, now);
        shared.persist_meta(&gateway);
        resp
    })
    .await
    .expect("request task");
    to_response(resp)
}

async fn shutdown_signal() {
    let ctrl_c = async {
        let _ = tokio::signal::ctrl_c().await;
    };
    #[cfg(unix)]
    let term = async {
        match tokio::signal::unix::signal(tokio::signal::unix::SignalKind::terminate()) {
            Ok(mut s) => {
                s.recv().await;
            }
            Err(_) => std::future::pending::<()>().await,
        }
    };
    #[cfg(not(unix))]
    let term = std::future::pending::<()>();
    tokio::select! {
        _ = ctrl_c => {},
        _ = term => {},
    }
}

/// Runs until SIGINT/SIGTERM. `on_ready` gets the bound address.
pub async fn serve(config: Config, on_ready: impl FnOnce(SocketAddr)) -> Result<(), ServeError> {
    let gateway = build_gateway(&config)?;
    let listener = match tokio::net::TcpListener::bind(&config.listen_address).await {
        Ok(l) => l,
        Err(e) if e.kind() == std::io::ErrorKind::AddrInUse => {
            return Err(ServeError::AddressInUse(config.listen_address.clone()))
        }
        Err(source) => return Err(ServeError::Bind { addr: config.listen_address.clone(), source }),
    };
    let meta = MirrorMeta::of(gateway.pair());
    let shared = Arc::new(Shared { gateway: Mutex::new(gateway), data_dir: config.data_dir.clone(), meta: Mutex::new(meta) });

    let pump = {
        let shared = shared.clone();
        tokio::spawn(async move {
            let mut every = tokio::time::interval(Duration::from_millis(100));
            loop {
                every.tick().await;
                let shared = shared.clone();
                let _ = tokio::task::spawn_blocking(move || {
                    let mut g = shared.gateway.lock().expect("gateway lock");
                    if let Err(e) = g.pump() {
                        eprintln!("bdps: replication: {e}");
                    }
                })
                .await;
            }
        })
    };
    let ticker = {
        let shared = shared.clone();
        tokio::spawn(async move {
            let mut every = tokio::time::interval(Duration::from_secs(1));
            every.tick().await;
            loop {
                every.tick().await;
                shared.gateway.lock().expect("gateway lock").tick(now_ms());
            }
        })
    };

    on_ready(listener.local_addr()?);
    let app = Router::new().fallback(handle).with_state(shared.clone());
    axum::serve(listener, app).with_graceful_shutdown(shutdown_signal()).await?;
    pump.abort();
    ticker.abort();

    let mut g = shared.gateway.lock().expect("gateway lock");
    if let Err(e) = g.pump() {
        eprintln!("bdps: replication at shutdown: {e}");
    }
    g.pair().local.checkpoint()?;
    g.pair().remote.registry().checkpoint()?;
    shared.persist_meta(&g);
    eprintln!("bdps: stopped at seq {} (state {:016x})", g.pair().primary().last_seq(), g.pair().primary().state_hash());
    Ok(())
}
