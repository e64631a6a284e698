//! Principals, salted credentials, sessions and the permission matrix.

use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use rand::RngCore;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use thiserror::Error;

use crate::nid::{parse_nid, NationalId};
use crate::registry::LinkedTable;

/// Every failed authentication or authorization looks the same to the
/// caller, whatever the cause.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Error)]
#[error("authentication failed")]
pub struct AuthFailure;

#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(tag = "kind", content = "id", rename_all = "snake_case")]
pub enum Principal {
    Citizen(NationalId),
    Corporate(String),
    DataEntryAuthority(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Role {
    Citizen,
    Corporate,
    DataEntryAuthority,
}

impl Principal {
    pub fn role(&self) -> Role {
        match self {
            Principal::Citizen(_) => Role::Citizen,
            Principal::Corporate(_) => Role::Corporate,
            Principal::DataEntryAuthority(_) => Role::DataEntryAuthority,
        }
    }

    /// `kind:id` text form, also used as the ledger key.
    pub fn key(&self) -> String {
        self.to_string()
    }
}

impl fmt::Display for Principal {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Principal::Citizen(nid) => write!(f, "citizen:{nid}"),
            Principal::Corporate(id) => write!(f, "corporate:{id}"),
            Principal::DataEntryAuthority(id) => write!(f, "authority:{id}"),
        }
    }
}

impl FromStr for Principal {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let (kind, id) = s.split_once(':').ok_or_else(|| format!("expected kind:id, got {s:?}"))?;
        if id.is_empty() {
            return Err("empty principal id".into());
        }
        match kind {
            "citizen" => parse_nid(id).map(Principal::Citizen).map_err(|e| e.to_string()),
            "corporate" => Ok(Principal::Corporate(id.to_string())),
            "authority" => Ok(Principal::DataEntryAuthority(id.to_string())),
            other => Err(format!("unknown principal kind {other:?}")),
        }
    }
}

/// Stored credential. Only the salted SHA-256 digest of the secret is kept.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Credential {
    pub principal: Principal,
    pub salt: String,
    pub secret_hash: String,
}

fn digest(salt: &str, secret: &str) -> [u8; 32] {
    let mut h = Sha256::new();
    h.update(salt.as_bytes());
    h.update([0u8]);
    h.update(secret.as_bytes());
    h.finalize().into()
}

fn to_hex(bytes: &[u8]) -> String {
    bytes.iter().map(|b| format!("{b:02x}")).collect()
}

fn ct_eq(a: &[u8], b: &[u8]) -> bool {
    a.len() == b.len() && a.iter().zip(b).fold(0u8, |acc, (x, y)| acc | (x ^ y)) == 0
}

impl Credential {
    pub fn new(principal: Principal, secret: &str, rng: &mut impl RngCore) -> Self {
        let mut salt = [0u8; 16];
        rng.fill_bytes(&mut salt);
        let salt = to_hex(&salt);
        let secret_hash = to_hex(&digest(&salt, secret));
        Credential { principal, salt, secret_hash }
    }

    pub fn verify(&self, secret: &str) -> bool {
        ct_eq(to_hex(&digest(&self.salt, secret)).as_bytes(), self.secret_hash.as_bytes())
    }
}

/// Anything that can look up a stored credential.
pub trait CredentialSource {
    fn credential(&self, principal: &Principal) -> Option<Credential>;
}

/// Credentials held in memory (operators and corporate keys from config).
#[derive(Debug, Clone, Default)]
pub struct CredentialStore {
    creds: BTreeMap<Principal, Credential>,
}

impl CredentialStore {
    pub fn insert(&mut self, cred: Credential) {
        self.creds.insert(cred.principal.clone(), cred);
    }

    pub fn len(&self) -> usize {
        self.creds.len()
    }

    pub fn is_empty(&self) -> bool {
        self.creds.is_empty()
    }
}

impl CredentialSource for CredentialStore {
    fn credential(&self, principal: &Principal) -> Option<Credential> {
        self.creds.get(principal).cloned()
    }
}

impl<A: CredentialSource, B: CredentialSource> CredentialSource for (A, B) {
    fn credential(&self, principal: &Principal) -> Option<Credential> {
        self.0.credential(principal).or_else(|| self.1.credential(principal))
    }
}

impl<T: CredentialSource + ?Sized> CredentialSource for &T {
    fn credential(&self, principal: &Principal) -> Option<Credential> {
        (**self).credential(principal)
    }
}

/// Checks a secret. Unknown principals still pay for one digest so both
/// failure paths cost the same.
pub fn check_secret(source: &impl CredentialSource, principal: &Principal, secret: &str) -> Result<(), AuthFailure> {
    match source.credential(principal) {
        Some(cred) if cred.principal == *principal && cred.verify(secret) => Ok(()),
        Some(_) => Err(AuthFailure),
        None => {
            let _ = digest("0000000000000000", secret);
            Err(AuthFailure)
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Session {
    pub token: String,
    pub principal: Principal,
    pub role: Role,
    /// Milliseconds, same clock as the `now` passed to the store.
    pub expires_at: u64,
}

#[derive(Debug, Clone)]
pub struct SessionStore {
    ttl_ms: u64,
    sessions: BTreeMap<String, Session>,
}

pub const DEFAULT_SESSION_TTL_MS: u64 = 30 * 60 * 1000;

impl Default for SessionStore {
    fn default() -> Self {
        SessionStore::new(DEFAULT_SESSION_TTL_MS)
    }
}

impl SessionStore {
    pub fn new(ttl_ms: u64) -> Self {
        SessionStore { ttl_ms, sessions: BTreeMap::new() }
    }

    /// Verifies the secret and issues a token.
    pub fn authenticate(
        &mut self,
        source: &impl CredentialSource,
        principal: &Principal,
        secret: &str,
        now: u64,
        rng: &mut impl RngCore,
    ) -> Result<Session, AuthFailure> {
        check_secret(source, principal, secret)?;
        let mut raw = [0u8; 16];
        rng.fill_bytes(&mut raw);
        let session = Session {
            token: to_hex(&raw),
            principal: principal.clone(),
            role: principal.role(),
            expires_at: now.saturating_add(self.ttl_ms),
        };
        self.sessions.insert(session.token.clone(), session.clone());
        Ok(session)
    }

    pub fn validate(&mut self, token: &str, now: u64) -> Result<Session, AuthFailure> {
        match self.sessions.get(token) {
            Some(s) if now < s.expires_at => Ok(s.clone()),
            Some(_) => {
                self.sessions.remove(token);
                Err(AuthFailure)
            }
            None => Err(AuthFailure),
        }
    }

    pub fn purge_expired(&mut self, now: u64) {
        self.sessions.retain(|_, s| now < s.expires_at);
    }
}

/// Operations subject to authorization.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Operation {
    Verify,
    BulkVerify,
    OwnerLookup,
    Insert,
    InsertLinked(LinkedTable),
    Update,
    Archive,
    Invoice,
    Admin,
}

impl Operation {
    pub const ALL: [Operation; 12] = [
        Operation::Verify,
        Operation::BulkVerify,
        Operation::OwnerLookup,
        Operation::Insert,
        Operation::InsertLinked(LinkedTable::Criminal),
        Operation::InsertLinked(LinkedTable::Bank),
        Operation::InsertLinked(LinkedTable::Education),
        Operation::InsertLinked(LinkedTable::Job),
        Operation::Update,
        Operation::Archive,
        Operation::Invoice,
        Operation::Admin,
    ];
}

/// Columns a citizen may change on their own record.
pub const CITIZEN_SELF_UPDATE_COLUMNS: &[&str] = &["Phone", "Present_address"];

/// `target` is the national id the operation touches, when it has one.
pub fn permits(principal: &Principal, op: Operation, target: Option<&NationalId>) -> bool {
    use Operation::*;
    match principal {
        Principal::DataEntryAuthority(_) => !matches!(op, OwnerLookup),
        Principal::Corporate(_) => matches!(op, Verify | BulkVerify | Invoice),
        Principal::Citizen(own) => match op {
            Verify => true,
            OwnerLookup | Update => target == Some(own),
            _ => false,
        },
    }
}

pub fn authorize(principal: &Principal, op: Operation, target: Option<&NationalId>) -> Result<(), AuthFailure> {
    if permits(principal, op, target) {
        Ok(())
    } else {
        Err(AuthFailure)
    }
}
