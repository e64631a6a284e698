//! The HTTP/JSON API as a plain request handler. The `serve` binary maps
//! real HTTP onto [`ApiRequest`]/[`ApiResponse`]; tests call
//! [`Gateway::handle`] directly.
//!
//! | method | path                          | operation                 |
//! |--------|-------------------------------|---------------------------|
//! | POST   | `/auth`                       | issue a session token     |
//! | POST   | `/citizens`                   | insert                    |
//! | GET    | `/citizens/{nid}`             | owner lookup + printout   |
//! | POST   | `/citizens/{nid}/verify`      | verify claims             |
//! | POST   | `/citizens/{nid}/update`      | update columns            |
//! | POST   | `/citizens/{nid}/linked`      | insert a linked row       |
//! | POST   | `/citizens/{nid}/archive`     | archive a deceased person |
//! | POST   | `/verify/bulk`                | verify many               |
//! | GET    | `/invoice?key=&from=&to=`     | usage invoice             |
//! | GET    | `/health`                     | role, hashes, health      |
//! | GET    | `/metrics`                    | autoscaler CSV            |
//! | POST   | `/admin/scale`                | change the scale policy   |
//! | POST   | `/admin/promote`              | promote the remote        |
//! | POST   | `/admin/resync`               | resync local from remote  |
//! | POST   | `/admin/checkpoint`           | write snapshots           |

use std::collections::BTreeMap;

use chrono::NaiveDate;
use rand::SeedableRng;
use rand_chacha::ChaCha20Rng;
use serde::Deserialize;
use serde_json::{json, Value};

use super::auth::{authorize, AuthFailure, Credential, CredentialStore, Operation, Principal, Session, SessionStore};
use super::billing::{BillingError, UsageLedger};
use super::routing::{route, DetectorConfig, FailureDetector, Health, LocalLoad, RouteDecision, RouteTarget, Transition};
use crate::elasticity::{metrics_csv, Autoscaler, MetricsRow, PolicyError, ScaleAction, ScalePolicy};
use crate::nid::parse_nid;
use crate::registry::{render_official_printout, CitizenRecord, LinkedRecord, LinkedTable, Registry, RegistryError};
use crate::replication::{PromoteReason, ReplicatedPair, ReplicationError, Role};

#[derive(Debug, Clone, PartialEq)]
pub struct ApiRequest {
    pub method: String,
    /// Path without the query string.
    pub path: String,
    pub query: BTreeMap<String, String>,
    /// Bearer token, if any.
    pub token: Option<String>,
    pub body: Value,
}

impl ApiRequest {
    pub fn new(method: &str, path: &str) -> Self {
        let (path, query) = match path.split_once('?') {
            Some((p, q)) => (p, parse_query(q)),
            None => (path, BTreeMap::new()),
        };
        ApiRequest { method: method.to_ascii_uppercase(), path: path.to_string(), query, token: None, body: Value::Null }
    }

    pub fn with_token(mut self, token: impl Into<String>) -> Self {
        self.token = Some(token.into());
        self
    }

    pub fn with_body(mut self, body: Value) -> Self {
        self.body = body;
        self
    }
}

/// `a=1&b=2`, percent-decoding `%XX` and `+`.
pub fn parse_query(q: &str) -> BTreeMap<String, String> {
    q.split('&')
        .filter(|p| !p.is_empty())
        .map(|pair| {
            let (k, v) = pair.split_once('=').unwrap_or((pair, ""));
            (percent_decode(k), percent_decode(v))
        })
        .collect()
}

fn percent_decode(s: &str) -> String {
    let bytes = s.as_bytes();
    let mut out = Vec::with_capacity(bytes.len());
    let mut i = 0;
    while i < bytes.len() {
        match bytes[i] {
            b'+' => out.push(b' '),
            b'%' if i + 2 < bytes.len() => match (hex_val(bytes[i + 1]), hex_val(bytes[i + 2])) {
                (Some(hi), Some(lo)) => {
                    out.push(hi << 4 | lo);
                    i += 2;
                }
                _ => out.push(b'%'),
            },
            b => out.push(b),
        }
        i += 1;
    }
    String::from_utf8_lossy(&out).into_owned()
}

fn hex_val(b: u8) -> Option<u8> {
    (b as char).to_digit(16).map(|d| d as u8)
}

#[derive(Debug, Clone, PartialEq)]
pub enum ResponseBody {
    Json(Value),
    Csv(String),
}

#[derive(Debug, Clone, PartialEq)]
pub struct ApiResponse {
    pub status: u16,
    pub body: ResponseBody,
}

impl ApiResponse {
    fn json(status: u16, body: Value) -> Self {
        ApiResponse { status, body: ResponseBody::Json(body) }
    }

    fn error(status: u16, code: &str, message: impl std::fmt::Display) -> Self {
        ApiResponse::json(status, json!({ "error": code, "message": message.to_string() }))
    }

    pub fn json_body(&self) -> Option<&Value> {
        match &self.body {
            ResponseBody::Json(v) => Some(v),
            ResponseBody::Csv(_) => None,
        }
    }
}

fn auth_failed() -> ApiResponse {
    ApiResponse::error(401, "auth_failure", AuthFailure)
}

fn registry_error(e: &RegistryError) -> ApiResponse {
    let (status, code) = match e {
        RegistryError::InvalidNid(_) => (400, "invalid_nid"),
        RegistryError::DuplicateId(_) => (409, "duplicate_id"),
        RegistryError::OrphanRecord(_) => (409, "orphan_record"),
        RegistryError::ArchivedTarget(_) => (409, "archived_target"),
        RegistryError::NoSuchCitizen => (404, "no_such_citizen"),
        RegistryError::AlreadyArchived(_) => (409, "already_archived"),
        RegistryError::AuthFailure => return auth_failed(),
        RegistryError::UnknownField(_) => (400, "unknown_field"),
        RegistryError::InvalidValue(_) | RegistryError::InvalidRecord(_) => (400, "invalid_value"),
        RegistryError::Storage(_) | RegistryError::CorruptState { .. } | RegistryError::Io(_) => {
            (500, "storage_error")
        }
    };
    ApiResponse::error(status, code, e)
}

fn replication_error(e: &ReplicationError) -> ApiResponse {
    let status = match e {
        ReplicationError::AlreadyPromoted | ReplicationError::NotPromoted => 409,
        _ => 500,
    };
    ApiResponse::error(status, "replication_error", e)
}

fn bad_request(message: impl std::fmt::Display) -> ApiResponse {
    ApiResponse::error(400, "bad_request", message)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Served {
    Local,
    Remote { stale: bool },
}

impl Served {
    fn decorate(self, mut body: Value) -> Value {
        if let Value::Object(map) = &mut body {
            let (by, staleness) = match self {
                Served::Local => ("local", "fresh"),
                Served::Remote { stale: false } => ("remote", "fresh"),
                Served::Remote { stale: true } => ("remote", "possibly_stale"),
            };
            map.insert("served_by".into(), by.into());
            map.insert("staleness".into(), staleness.into());
        }
        body
    }
}

/// Admission ticket from [`Gateway::admit`]; hand it back to
/// [`Gateway::dispatch`].
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Admission {
    pub decision: RouteDecision,
}

#[derive(Debug)]
pub struct GatewayConfig {
    pub policy: ScalePolicy,
    pub detector: DetectorConfig,
    pub session_ttl_ms: u64,
    pub seed: u64,
}

impl Default for GatewayConfig {
    fn default() -> Self {
        GatewayConfig {
            policy: ScalePolicy::default(),
            detector: DetectorConfig::default(),
            session_ttl_ms: super::auth::DEFAULT_SESSION_TTL_MS,
            seed: 0,
        }
    }
}

/// Gateway state: replicated registries, sessions, ledger, autoscaler and
/// router bookkeeping.
#[derive(Debug)]
pub struct Gateway {
    pair: ReplicatedPair,
    accounts: CredentialStore,
    sessions: SessionStore,
    ledger: UsageLedger,
    autoscaler: Autoscaler,
    detector: FailureDetector,
    remote_health: Health,
    in_flight: BTreeMap<u32, usize>,
    metrics: Vec<MetricsRow>,
    rng: ChaCha20Rng,
}

impl Gateway {
    pub fn new(pair: ReplicatedPair, ledger: UsageLedger, config: GatewayConfig) -> Result<Self, PolicyError> {
        Ok(Gateway {
            pair,
            accounts: CredentialStore::default(),
            sessions: SessionStore::new(config.session_ttl_ms),
            ledger,
            autoscaler: Autoscaler::new(config.policy)?,
            detector: FailureDetector::new(config.detector),
            remote_health: Health::Up,
            in_flight: BTreeMap::new(),
            metrics: Vec::new(),
            rng: ChaCha20Rng::seed_from_u64(config.seed),
        })
    }

    /// Adds an operator account (authority or corporate key) held outside
    /// the replicated state.
    pub fn add_account(&mut self, principal: Principal, secret: &str) {
        let cred = Credential::new(principal, secret, &mut self.rng);
        self.accounts.insert(cred);
    }

    pub fn pair(&self) -> &ReplicatedPair {
        &self.pair
    }

    pub fn pair_mut(&mut self) -> &mut ReplicatedPair {
        &mut self.pair
    }

    pub fn ledger(&self) -> &UsageLedger {
        &self.ledger
    }

    pub fn autoscaler(&self) -> &Autoscaler {
        &self.autoscaler
    }

    pub fn local_health(&self) -> Health {
        self.detector.health()
    }

    pub fn set_remote_health(&mut self, health: Health) {
        self.remote_health = health;
    }

    /// Feeds one local health observation to the failure detector and
    /// promotes the remote when local is declared down.
    pub fn observe_local(&mut self, ok: bool) -> Option<Transition> {
        let t = if ok { self.detector.record_success() } else { self.detector.record_timeout() };
        if t == Some(Transition::WentDown) && self.pair.role() == Role::LocalPrimary {
            let _ = self.pair.promote(PromoteReason::LocalFailure);
        }
        t
    }

    /// Ships pending log entries to the mirror.
    pub fn pump(&mut self) -> Result<u64, ReplicationError> {
        self.pair.pump()
    }

    /// Autoscaler tick; also records a metrics row.
    pub fn tick(&mut self, now_ms: u64) -> ScaleAction {
        self.autoscaler.set_queue_depth(self.in_flight.values().sum());
        let action = self.autoscaler.tick(now_ms);
        self.metrics.push(self.autoscaler.sample(now_ms));
        action
    }

    pub fn metrics(&self) -> &[MetricsRow] {
        &self.metrics
    }

    fn local_health_for_routing(&self) -> Health {
        match self.pair.role() {
            Role::RemotePromoted => Health::Down,
            Role::LocalPrimary => self.detector.health(),
        }
    }

    /// Routes a request and books it against the chosen worker.
    pub fn admit(&mut self, is_write: bool, now_ms: u64) -> Admission {
        self.autoscaler.observe_arrival(now_ms);
        let active = self.autoscaler.state().active_workers;
        let queues: Vec<(u32, usize)> =
            (0..active).map(|w| (w, self.in_flight.get(&w).copied().unwrap_or(0))).collect();
        let load = LocalLoad { worker_queues: &queues, queue_cap: self.autoscaler.policy().overflow_queue_cap };
        let decision = route(is_write, load, self.local_health_for_routing(), self.remote_health);
        if let RouteTarget::LocalWorker(w) = decision.target {
            *self.in_flight.entry(w).or_default() += 1;
        }
        Admission { decision }
    }

    fn release(&mut self, admission: Admission) {
        if let RouteTarget::LocalWorker(w) = admission.decision.target {
            if let Some(n) = self.in_flight.get_mut(&w) {
                *n = n.saturating_sub(1);
            }
        }
    }

    /// Admits and dispatches in one step.
    pub fn handle(&mut self, req: &ApiRequest, now_ms: u64) -> ApiResponse {
        let admission = self.admit(is_write(req), now_ms);
        self.dispatch(req, admission, now_ms)
    }

    pub fn dispatch(&mut self, req: &ApiRequest, admission: Admission, now_ms: u64) -> ApiResponse {
        let resp = self.execute(req, admission, now_ms);
        self.release(admission);
        resp
    }

    fn session(&mut self, req: &ApiRequest, now_ms: u64) -> Result<Session, ApiResponse> {
        let token = req.token.as_deref().ok_or_else(auth_failed)?;
        self.sessions.validate(token, now_ms).map_err(|_| auth_failed())
    }

    fn served(&self, admission: Admission) -> Option<Served> {
        match admission.decision.target {
            RouteTarget::LocalWorker(_) => Some(Served::Local),
            RouteTarget::Remote => Some(Served::Remote { stale: self.pair.role() == Role::LocalPrimary }),
            RouteTarget::Rejected => None,
        }
    }

    /// Registry for reads on the routed side.
    fn read_side(&self, served: Served) -> &Registry {
        match served {
            Served::Local => &self.pair.local,
            Served::Remote { .. } => self.pair.remote.registry(),
        }
    }

    /// Registry for writes on the routed side. A write routed to an
    /// unpromoted remote has nowhere to go.
    fn write_side(&mut self, served: Served) -> Result<&mut Registry, ApiResponse> {
        match (served, self.pair.role()) {
            (Served::Local, Role::LocalPrimary) => Ok(&mut self.pair.local),
            (Served::Remote { .. }, Role::RemotePromoted) => Ok(self.pair.primary_mut()),
            _ => Err(ApiResponse::error(503, "unavailable", "no primary reachable for writes")),
        }
    }

    fn after_write(&mut self) -> Result<(), ApiResponse> {
        self.pair.after_write().map_err(|e| replication_error(&e))
    }

    fn bill(&mut self, principal: &Principal, op: &str, records: u64, now_ms: u64) -> Result<(), ApiResponse> {
        self.ledger
            .record_usage(principal, op, records, now_ms)
            .map(|_| ())
            .map_err(|e: BillingError| ApiResponse::error(500, "billing", e))
    }

    fn execute(&mut self, req: &ApiRequest, admission: Admission, now_ms: u64) -> ApiResponse {
        let segments: Vec<&str> = req.path.trim_matches('/').split('/').filter(|s| !s.is_empty()).collect();
        let method = req.method.as_str();
        // health, metrics and auth are answered by the gateway itself
        match (method, segments.as_slice()) {
            ("GET" | "POST", ["health"]) => return self.health(),
            ("GET", ["metrics"]) => return ApiResponse { status: 200, body: ResponseBody::Csv(metrics_csv(&self.metrics)) },
            ("POST", ["auth"]) => return self.authenticate(req, now_ms),
            _ => {}
        }
        let Some(served) = self.served(admission) else {
            return ApiResponse::error(503, "unavailable", "neither local nor remote cloud is reachable");
        };
        let session = match self.session(req, now_ms) {
            Ok(s) => s,
            Err(resp) => return resp,
        };
        let result = match (method, segments.as_slice()) {
            ("POST", ["citizens"]) => self.insert(&session, req, served, now_ms),
            ("GET", ["citizens", nid]) => self.owner_lookup(&session, nid, served, now_ms),
            ("POST", ["citizens", nid, "verify"]) => self.verify(&session, nid, req, served, now_ms),
            ("POST", ["citizens", nid, "update"]) => self.update(&session, nid, req, served, now_ms),
            ("POST", ["citizens", nid, "linked"]) => self.insert_linked(&session, nid, req, served),
            ("POST", ["citizens", nid, "archive"]) => self.archive(&session, nid, req, served),
            ("POST", ["verify", "bulk"]) => self.bulk_verify(&session, req, served, now_ms),
            ("GET", ["invoice"]) => self.invoice(&session, req),
            ("POST", ["admin", action]) => self.admin(&session, action, req),
            _ => Err(ApiResponse::error(404, "not_found", format!("{} {}", req.method, req.path))),
        };
        match result {
            Ok(resp) => resp,
            Err(resp) => resp,
        }
    }

    fn health(&self) -> ApiResponse {
        let primary = self.pair.primary();
        ApiResponse::json(
            200,
            json!({
                "status": "ok",
                "role": self.pair.role(),
                "mirror": self.pair.state(),
                "local": self.detector.health(),
                "remote": self.remote_health,
                "last_seq": primary.last_seq(),
                "state_hash": format!("{:016x}", primary.state_hash()),
                "local_state_hash": format!("{:016x}", self.pair.local.state_hash()),
                "remote_state_hash": format!("{:016x}", self.pair.remote.registry().state_hash()),
                "active_workers": self.autoscaler.state().active_workers,
            }),
        )
    }

    fn authenticate(&mut self, req: &ApiRequest, now_ms: u64) -> ApiResponse {
        #[derive(Deserialize)]
        struct Body {
            principal: String,
            secret: String,
        }
        let Ok(body) = serde_json::from_value::<Body>(req.body.clone()) else {
            return bad_request("expected {\"principal\", \"secret\"}");
        };
        let Ok(principal) = body.principal.parse::<Principal>() else {
            return auth_failed();
        };
        let source = (&self.accounts, self.pair.primary().view());
        match self.sessions.authenticate(&source, &principal, &body.secret, now_ms, &mut self.rng) {
            Ok(s) => ApiResponse::json(
                200,
                json!({ "token": s.token, "role": s.role, "principal": s.principal.key(), "expires_at": s.expires_at }),
            ),
            Err(_) => auth_failed(),
        }
    }

    fn insert(&mut self, session: &Session, req: &ApiRequest, served: Served, now_ms: u64) -> Result<ApiResponse, ApiResponse> {
        authorize(&session.principal, Operation::Insert, None).map_err(|_| auth_failed())?;
        #[derive(Deserialize)]
        #[serde(deny_unknown_fields)]
        struct Body {
            record: CitizenRecord,
            #[serde(default)]
            password: Option<String>,
        }
        let body: Body = serde_json::from_value(req.body.clone()).map_err(bad_request)?;
        let nid = body.record.national_id;
        let cred = body.password.as_deref().map(|p| Credential::new(Principal::Citizen(nid), p, &mut self.rng));
        let reg = self.write_side(served)?;
        let did = reg.insert_citizen_with(body.record, cred).map_err(|e| registry_error(&e))?;
        let seq = reg.last_seq();
        self.after_write()?;
        self.bill(&session.principal, "registration", 1, now_ms)?;
        Ok(ApiResponse::json(201, served.decorate(json!({ "did": did, "national_id": nid, "seq": seq }))))
    }

    fn owner_lookup(&mut self, session: &Session, nid: &str, served: Served, now_ms: u64) -> Result<ApiResponse, ApiResponse> {
        let nid = parse_nid(nid).map_err(|_| auth_failed())?;
        authorize(&session.principal, Operation::OwnerLookup, Some(&nid)).map_err(|_| auth_failed())?;
        let full = self
            .read_side(served)
            .view()
            .full_record(&nid)
            .map_err(|e| registry_error(&e))?
            .ok_or_else(auth_failed)?;
        let printout = render_official_printout(&full.record);
        self.bill(&session.principal, "owner_lookup", 1, now_ms)?;
        Ok(ApiResponse::json(
            200,
            served.decorate(json!({
                "version": full.version,
                "record": full.record,
                "linked": full.linked,
                "printout": printout,
            })),
        ))
    }

    fn verify(&mut self, session: &Session, nid: &str, req: &ApiRequest, served: Served, now_ms: u64) -> Result<ApiResponse, ApiResponse> {
        authorize(&session.principal, Operation::Verify, None).map_err(|_| auth_failed())?;
        let claims = claims_of(&req.body)?;
        let report = self.read_side(served).verify_fields(nid, &claims).map_err(|e| registry_error(&e))?;
        self.bill(&session.principal, "verify", 1, now_ms)?;
        let body = serde_json::to_value(&report).expect("report serializes");
        Ok(ApiResponse::json(200, served.decorate(body)))
    }

    fn bulk_verify(&mut self, session: &Session, req: &ApiRequest, served: Served, now_ms: u64) -> Result<ApiResponse, ApiResponse> {
        authorize(&session.principal, Operation::BulkVerify, None).map_err(|_| auth_failed())?;
        #[derive(Deserialize)]
        struct Item {
            national_id: String,
            claims: BTreeMap<String, String>,
        }
        #[derive(Deserialize)]
        struct Body {
            items: Vec<Item>,
        }
        let body: Body = serde_json::from_value(req.body.clone()).map_err(bad_request)?;
        let view = self.read_side(served).view();
        let reports: Vec<Value> = body
            .items
            .iter()
            .map(|item| match view.verify_fields(&item.national_id, &item.claims) {
                Ok(r) => serde_json::to_value(&r).expect("report serializes"),
                Err(e) => json!({ "national_id": item.national_id, "error": registry_error(&e).json_body().and_then(|b| b.get("error")).cloned() }),
            })
            .collect();
        self.bill(&session.principal, "bulk_verify", body.items.len() as u64, now_ms)?;
        Ok(ApiResponse::json(200, served.decorate(json!({ "reports": reports }))))
    }

    fn update(&mut self, session: &Session, nid: &str, req: &ApiRequest, served: Served, now_ms: u64) -> Result<ApiResponse, ApiResponse> {
        #[derive(Deserialize)]
        struct Body {
            changes: BTreeMap<String, String>,
        }
        let body: Body = serde_json::from_value(req.body.clone()).map_err(bad_request)?;
        let reg = self.write_side(served)?;
        let version = reg.update_citizen(nid, &body.changes, &session.principal).map_err(|e| registry_error(&e))?;
        self.after_write()?;
        self.bill(&session.principal, "update", 1, now_ms)?;
        Ok(ApiResponse::json(200, served.decorate(json!({ "version": version }))))
    }

    fn insert_linked(&mut self, session: &Session, nid: &str, req: &ApiRequest, served: Served) -> Result<ApiResponse, ApiResponse> {
        let nid = parse_nid(nid).map_err(|e| registry_error(&e.into()))?;
        #[derive(Deserialize)]
        struct Body {
            table: String,
            #[serde(default)]
            fields: BTreeMap<String, String>,
        }
        let body: Body = serde_json::from_value(req.body.clone()).map_err(bad_request)?;
        let table = LinkedTable::parse(&body.table).ok_or_else(|| bad_request(format!("unknown table {:?}", body.table)))?;
        authorize(&session.principal, Operation::InsertLinked(table), Some(&nid)).map_err(|_| auth_failed())?;
        let mut row = LinkedRecord::empty(table, nid);
        for (col, value) in &body.fields {
            // the path names the citizen; surrogate ids are assigned on insert
            if col == "National_ID" {
                continue;
            }
            row.set_field(col, value).map_err(|e| registry_error(&e.into()))?;
        }
        let reg = self.write_side(served)?;
        let id = reg.insert_linked(row).map_err(|e| registry_error(&e))?;
        self.after_write()?;
        Ok(ApiResponse::json(201, served.decorate(json!({ "table": table.table_name(), "id": id }))))
    }

    fn archive(&mut self, session: &Session, nid: &str, req: &ApiRequest, served: Served) -> Result<ApiResponse, ApiResponse> {
        authorize(&session.principal, Operation::Archive, None).map_err(|_| auth_failed())?;
        #[derive(Deserialize)]
        struct Body {
            death_date: NaiveDate,
        }
        let body: Body = serde_json::from_value(req.body.clone()).map_err(bad_request)?;
        let reg = self.write_side(served)?;
        let receipt = reg.archive_deceased(nid, body.death_date).map_err(|e| registry_error(&e))?;
        self.after_write()?;
        Ok(ApiResponse::json(200, served.decorate(serde_json::to_value(&receipt).expect("receipt serializes"))))
    }

    fn invoice(&mut self, session: &Session, req: &ApiRequest) -> Result<ApiResponse, ApiResponse> {
        authorize(&session.principal, Operation::Invoice, None).map_err(|_| auth_failed())?;
        let key = req.query.get("key").cloned().unwrap_or_else(|| session.principal.key());
        if matches!(session.principal, Principal::Corporate(_)) && key != session.principal.key() {
            return Err(auth_failed());
        }
        let num = |name: &str, default: u64| -> Result<u64, ApiResponse> {
            match req.query.get(name) {
                None => Ok(default),
                Some(v) => v.parse().map_err(|_| bad_request(format!("{name} must be an integer"))),
            }
        };
        let from = num("from", 0)?;
        let to = num("to", u64::MAX)?;
        let inv = self.ledger.invoice(&key, from, to);
        Ok(ApiResponse::json(200, serde_json::to_value(inv).expect("invoice serializes")))
    }

    fn admin(&mut self, session: &Session, action: &str, req: &ApiRequest) -> Result<ApiResponse, ApiResponse> {
        authorize(&session.principal, Operation::Admin, None).map_err(|_| auth_failed())?;
        match action {
            "scale" => {
                let mut policy = serde_json::to_value(self.autoscaler.policy()).expect("policy serializes");
                if let (Value::Object(p), Value::Object(changes)) = (&mut policy, &req.body) {
                    for (k, v) in changes {
                        p.insert(k.clone(), v.clone());
                    }
                }
                let policy: ScalePolicy = serde_json::from_value(policy).map_err(bad_request)?;
                self.autoscaler.set_policy(policy).map_err(bad_request)?;
                Ok(ApiResponse::json(200, json!({ "policy": policy, "state": self.autoscaler.state() })))
            }
            "promote" => {
                let report = self.pair.promote(PromoteReason::Manual).map_err(|e| replication_error(&e))?;
                Ok(ApiResponse::json(200, serde_json::to_value(report).expect("report serializes")))
            }
            "resync" => {
                let report = self.pair.resync().map_err(|e| replication_error(&e))?;
                self.detector = FailureDetector::new(self.detector.config());
                Ok(ApiResponse::json(200, serde_json::to_value(report).expect("report serializes")))
            }
            "checkpoint" => {
                let local = self.pair.local.checkpoint().map_err(|e| registry_error(&e))?;
                let remote = self.pair.remote.registry().checkpoint().map_err(|e| registry_error(&e))?;
                Ok(ApiResponse::json(
                    200,
                    json!({ "local_upto": local.upto_seq, "remote_upto": remote.upto_seq,
                            "state_hash": format!("{:016x}", self.pair.primary().state_hash()) }),
                ))
            }
            other => Err(ApiResponse::error(404, "not_found", format!("admin action {other:?}"))),
        }
    }
}

fn claims_of(body: &Value) -> Result<BTreeMap<String, String>, ApiResponse> {
    let claims = body.get("claims").unwrap_or(body);
    serde_json::from_value(claims.clone()).map_err(|_| bad_request("claims must be an object of strings"))
}

/// Whether a request changes registry state (and so must reach a primary).
pub fn is_write(req: &ApiRequest) -> bool {
    req.method == "POST"
        && req.path.starts_with("/citizens")
        && !req.path.ends_with("/verify")
}
