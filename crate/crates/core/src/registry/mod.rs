//! Citizen registry over the write log.
//!
//! All writes become [`Delta`]s appended to the registry's [`Log`] and
//! applied to its materialized [`State`]. Reads go through
//! [`RegistryView`], which works on any state, so a remote mirror answers
//! verification queries with exactly the same code as the local primary.
//!
//! Key layout inside the state:
//!
//! | key                                  | value                        |
//! |--------------------------------------|------------------------------|
//! | `citizen/<nid>`                      | [`StoredCitizen`] JSON       |
//! | `linked/<table>/<nid>/<id:012>`      | [`LinkedRecord`] JSON        |
//! | `archive/<nid>/<did:012>`            | [`ArchivedCitizen`] JSON     |
//! | `credential/<principal>`             | [`Credential`] JSON          |
//! | `counter/<table>`                    | last issued surrogate id     |

mod ingest;
mod printout;
mod schema;

use std::collections::{BTreeMap, BTreeSet};
use std::fs::{File, OpenOptions};
use std::io::{BufRead, BufReader, Write};
use std::path::{Path, PathBuf};

use chrono::NaiveDate;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::gateway::auth::{
    authorize, check_secret, AuthFailure, Credential, CredentialSource, Operation, Principal,
    CITIZEN_SELF_UPDATE_COLUMNS,
};
use crate::nid::{parse_nid, NationalId, NidError};
use crate::storage::{
    read_snapshot, replay, state_hash, write_snapshot, Delta, Log, LogEntry, OpKind, Snapshot, State,
    StorageError,
};

pub use ingest::{parse_csv, parse_jsonl, IngestLine};
pub use printout::{render_official_printout, PRINTOUT_HEADER};
pub use schema::{
    BankAccLoan, Blob, CitizenRecord, CriminalRecord, EducationRecord, FieldCodec, FieldError, Gender,
    JobRecord, LinkedRecord, LinkedTable,
};

pub const WAL_FILE: &str = "wal.log";
pub const SNAPSHOT_FILE: &str = "snapshot.bin";
pub const ARCHIVE_FILE: &str = "archive.jsonl";

#[derive(Debug, Error)]
pub enum RegistryError {
    #[error("invalid national id: {0}")]
    InvalidNid(#[from] NidError),
    #[error("national id {0} is already registered")]
    DuplicateId(NationalId),
    #[error("no citizen {0} to link to")]
    OrphanRecord(NationalId),
    #[error("citizen {0} is archived")]
    ArchivedTarget(NationalId),
    #[error("no such citizen")]
    NoSuchCitizen,
    #[error("citizen {0} is already archived")]
    AlreadyArchived(NationalId),
    #[error("authentication failed")]
    AuthFailure,
    #[error("unknown field {0}")]
    UnknownField(String),
    #[error("invalid value: {0}")]
    InvalidValue(#[from] FieldError),
    #[error("invalid record: {0}")]
    InvalidRecord(String),
    #[error("storage: {0}")]
    Storage(#[from] StorageError),
    #[error("corrupt state at {key}: {reason}")]
    CorruptState { key: String, reason: String },
    #[error("i/o: {0}")]
    Io(#[from] std::io::Error),
}

impl From<AuthFailure> for RegistryError {
    fn from(_: AuthFailure) -> Self {
        RegistryError::AuthFailure
    }
}

/// Citizen row plus its version counter.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct StoredCitizen {
    pub version: u64,
    pub record: CitizenRecord,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ArchivedCitizen {
    pub record: CitizenRecord,
    pub linked: Vec<LinkedRecord>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FullRecord {
    pub version: u64,
    pub record: CitizenRecord,
    pub linked: Vec<LinkedRecord>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ArchiveReceipt {
    pub national_id: NationalId,
    pub did: u64,
    pub death_date: NaiveDate,
    pub linked_rows: usize,
    pub seq: u64,
    /// Entries in the archive file after this one was appended.
    pub archive_entries: u64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum FieldVerdict {
    Match,
    Mismatch,
    UnknownField,
}

impl FieldVerdict {
    /// The strings the original clerk-facing pages print.
    pub fn legacy_text(self) -> &'static str {
        match self {
            FieldVerdict::Match => ".....OK",
            FieldVerdict::Mismatch => "XXXXXXXXXXXX...Wrong",
            FieldVerdict::UnknownField => "...Unknown field",
        }
    }
}

/// Per-field outcome of a verification. Holds field names and verdicts
/// only; stored values never enter it.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct VerificationReport {
    pub national_id: String,
    pub results: BTreeMap<String, FieldVerdict>,
}

pub fn citizen_key(nid: &NationalId) -> String {
    format!("citizen/{nid}")
}

pub fn linked_prefix(table: LinkedTable, nid: &NationalId) -> String {
    format!("linked/{}/{nid}/", table.short_name())
}

fn linked_key(table: LinkedTable, nid: &NationalId, id: u64) -> String {
    format!("{}{id:012}", linked_prefix(table, nid))
}

fn archive_prefix(nid: &NationalId) -> String {
    format!("archive/{nid}/")
}

fn archive_key(nid: &NationalId, did: u64) -> String {
    format!("{}{did:012}", archive_prefix(nid))
}

pub fn credential_key(principal: &Principal) -> String {
    format!("credential/{principal}")
}

fn counter_key(name: &str) -> String {
    format!("counter/{name}")
}

fn decode<T: for<'de> Deserialize<'de>>(key: &str, value: &str) -> Result<T, RegistryError> {
    serde_json::from_str(value).map_err(|e| RegistryError::CorruptState { key: key.to_string(), reason: e.to_string() })
}

fn encode<T: Serialize>(value: &T) -> String {
    serde_json::to_string(value).expect("record serializes")
}

fn prefix_range<'a>(state: &'a State, prefix: &'a str) -> impl Iterator<Item = (&'a String, &'a String)> + 'a {
    state.range(prefix.to_string()..).take_while(move |(k, _)| k.starts_with(prefix))
}

/// Read-only queries over a materialized state.
#[derive(Debug, Clone, Copy)]
pub struct RegistryView<'a> {
    state: &'a State,
}

impl<'a> RegistryView<'a> {
    pub fn new(state: &'a State) -> Self {
        RegistryView { state }
    }

    pub fn stored(&self, nid: &NationalId) -> Result<Option<StoredCitizen>, RegistryError> {
        let key = citizen_key(nid);
        self.state.get(&key).map(|v| decode(&key, v)).transpose()
    }

    pub fn citizen(&self, nid: &NationalId) -> Result<Option<CitizenRecord>, RegistryError> {
        Ok(self.stored(nid)?.map(|s| s.record))
    }

    pub fn is_live(&self, nid: &NationalId) -> bool {
        self.state.contains_key(&citizen_key(nid))
    }

    pub fn is_archived(&self, nid: &NationalId) -> bool {
        let prefix = archive_prefix(nid);
        let found = prefix_range(self.state, &prefix).next().is_some();
        found
    }

    pub fn linked(&self, nid: &NationalId) -> Result<Vec<LinkedRecord>, RegistryError> {
        let mut rows = Vec::new();
        for table in LinkedTable::ALL {
            let prefix = linked_prefix(table, nid);
            for (k, v) in prefix_range(self.state, &prefix) {
                rows.push(decode(k, v)?);
            }
        }
        Ok(rows)
    }

    pub fn full_record(&self, nid: &NationalId) -> Result<Option<FullRecord>, RegistryError> {
        match self.stored(nid)? {
            Some(s) => Ok(Some(FullRecord { version: s.version, record: s.record, linked: self.linked(nid)? })),
            None => Ok(None),
        }
    }

    pub fn archived(&self, nid: &NationalId) -> Result<Vec<ArchivedCitizen>, RegistryError> {
        let prefix = archive_prefix(nid);
        prefix_range(self.state, &prefix).map(|(k, v)| decode(k, v)).collect()
    }

    pub fn live_count(&self) -> usize {
        prefix_range(self.state, "citizen/").count()
    }

    pub fn archived_count(&self) -> usize {
        prefix_range(self.state, "archive/").count()
    }

    pub fn live_ids(&self) -> impl Iterator<Item = NationalId> + 'a {
        prefix_range(self.state, "citizen/").filter_map(|(k, _)| parse_nid(&k["citizen/".len()..]).ok())
    }

    pub fn counter(&self, name: &str) -> u64 {
        self.state.get(&counter_key(name)).and_then(|v| v.parse().ok()).unwrap_or(0)
    }

    /// Compares each claim against the stored row. Unknown column names
    /// are reported as such; the stored values themselves never leave
    /// this function.
    pub fn verify_fields(
        &self,
        nid_text: &str,
        claims: &BTreeMap<String, String>,
    ) -> Result<VerificationReport, RegistryError> {
        let nid = parse_nid(nid_text.trim())?;
        let record = self.citizen(&nid)?.ok_or(RegistryError::NoSuchCitizen)?;
        let results = claims
            .iter()
            .map(|(field, claim)| {
                let verdict = match record.claim_matches(field, claim) {
                    Some(true) => FieldVerdict::Match,
                    Some(false) => FieldVerdict::Mismatch,
                    None => FieldVerdict::UnknownField,
                };
                (field.clone(), verdict)
            })
            .collect();
        Ok(VerificationReport { national_id: nid.canonical(), results })
    }

    /// Full record for its owner. Unknown id and wrong password fail the
    /// same way.
    pub fn owner_lookup(
        &self,
        nid_text: &str,
        password: &str,
        extra: &impl CredentialSource,
    ) -> Result<FullRecord, RegistryError> {
        let Ok(nid) = parse_nid(nid_text.trim()) else {
            return Err(RegistryError::AuthFailure);
        };
        let principal = Principal::Citizen(nid);
        check_secret(&(self, extra), &principal, password)?;
        self.full_record(&nid)?.ok_or(RegistryError::AuthFailure)
    }
}

impl CredentialSource for RegistryView<'_> {
    fn credential(&self, principal: &Principal) -> Option<Credential> {
        let key = credential_key(principal);
        self.state.get(&key).and_then(|v| serde_json::from_str(v).ok())
    }
}

/// Where archived bundles are appended, one JSON object per line.
#[derive(Debug)]
enum ArchiveSink {
    Memory(Vec<String>),
    File { path: PathBuf, count: u64 },
}

impl ArchiveSink {
    fn count(&self) -> u64 {
        match self {
            ArchiveSink::Memory(lines) => lines.len() as u64,
            ArchiveSink::File { count, .. } => *count,
        }
    }

    fn append(&mut self, line: &str) -> Result<u64, RegistryError> {
        match self {
            ArchiveSink::Memory(lines) => lines.push(line.to_string()),
            ArchiveSink::File { path, count } => {
                let mut f = OpenOptions::new().create(true).append(true).open(path)?;
                f.write_all(line.as_bytes())?;
                f.write_all(b"\n")?;
                f.sync_data()?;
                *count += 1;
            }
        }
        Ok(self.count())
    }

    fn keys(&self) -> Result<BTreeSet<String>, RegistryError> {
        let lines: Vec<String> = match self {
            ArchiveSink::Memory(lines) => lines.clone(),
            ArchiveSink::File { path, .. } => {
                if !path.exists() {
                    return Ok(BTreeSet::new());
                }
                BufReader::new(File::open(path)?).lines().collect::<Result<_, _>>()?
            }
        };
        Ok(lines
            .iter()
            .filter_map(|l| serde_json::from_str::<ArchiveLine>(l).ok())
            .map(|l| l.key)
            .collect())
    }
}

#[derive(Serialize, Deserialize)]
struct ArchiveLine {
    key: String,
    seq: u64,
    #[serde(flatten)]
    bundle: ArchivedCitizen,
}

/// The single writer over one log and its materialized state.
#[derive(Debug)]
pub struct Registry {
    log: Log,
    state: State,
    archive: ArchiveSink,
    dir: Option<PathBuf>,
}

impl Default for Registry {
    fn default() -> Self {
        Registry::in_memory()
    }
}

impl Registry {
    pub fn in_memory() -> Self {
        Registry { log: Log::in_memory(), state: State::new(), archive: ArchiveSink::Memory(Vec::new()), dir: None }
    }

    /// Builds an in-memory registry by replaying `log`.
    pub fn from_log(log: Log) -> Result<Self, RegistryError> {
        let mut state = State::new();
        replay(&mut state, log.entries())?;
        let lines = prefix_range(&state, "archive/")
            .map(|(k, v)| -> Result<String, RegistryError> {
                Ok(encode(&ArchiveLine { key: k.clone(), seq: 0, bundle: decode(k, v)? }))
            })
            .collect::<Result<Vec<_>, _>>()?;
        Ok(Registry { log, state, archive: ArchiveSink::Memory(lines), dir: None })
    }

    /// Opens a data directory: loads the snapshot if present, replays the
    /// log tail after it, and re-appends any archive line that a crash
    /// kept out of the archive file.
    pub fn open(dir: impl AsRef<Path>) -> Result<Self, RegistryError> {
        let dir = dir.as_ref().to_path_buf();
        std::fs::create_dir_all(&dir)?;
        let log = Log::open(dir.join(WAL_FILE))?;
        let snap_path = dir.join(SNAPSHOT_FILE);
        let mut state = State::new();
        let mut upto = 0;
        if snap_path.exists() {
            let snap = read_snapshot(&snap_path)?;
            if snap.upto_seq > log.last_seq() {
                return Err(StorageError::SeqOutOfRange { requested: snap.upto_seq, max: log.last_seq() }.into());
            }
            state = snap.state()?;
            upto = snap.upto_seq;
        }
        replay(&mut state, log.range(upto, log.last_seq()))?;

        let archive_path = dir.join(ARCHIVE_FILE);
        let count = if archive_path.exists() {
            BufReader::new(File::open(&archive_path)?).lines().count() as u64
        } else {
            0
        };
        let mut reg = Registry { log, state, archive: ArchiveSink::File { path: archive_path, count }, dir: Some(dir) };
        reg.reconcile_archive()?;
        Ok(reg)
    }

    fn reconcile_archive(&mut self) -> Result<(), RegistryError> {
        let present = self.archive.keys()?;
        let missing: Vec<(String, String)> = prefix_range(&self.state, "archive/")
            .filter(|(k, _)| !present.contains(*k))
            .map(|(k, v)| (k.clone(), v.clone()))
            .collect();
        for (k, v) in missing {
            let seq = self.archive_seq(&k);
            let line = encode(&ArchiveLine { key: k.clone(), seq, bundle: decode(&k, &v)? });
            self.archive.append(&line)?;
        }
        Ok(())
    }

    fn archive_seq(&self, key: &str) -> u64 {
        self.log
            .entries()
            .iter()
            .rev()
            .find(|e| e.op_kind == OpKind::Archive && e.delta().is_ok_and(|d| d.put.iter().any(|(k, _)| k == key)))
            .map_or(0, |e| e.seq)
    }

    pub fn view(&self) -> RegistryView<'_> {
        RegistryView::new(&self.state)
    }

    pub fn log(&self) -> &Log {
        &self.log
    }

    pub fn state(&self) -> &State {
        &self.state
    }

    pub fn last_seq(&self) -> u64 {
        self.log.last_seq()
    }

    pub fn state_hash(&self) -> u64 {
        state_hash(&self.state)
    }

    pub fn archive_entries(&self) -> u64 {
        self.archive.count()
    }

    pub fn data_dir(&self) -> Option<&Path> {
        self.dir.as_deref()
    }

    /// Writes a snapshot of the current state (to disk when file-backed).
    pub fn checkpoint(&self) -> Result<Snapshot, RegistryError> {
        let snap = Snapshot::from_state(self.log.last_seq(), &self.state);
        if let Some(dir) = &self.dir {
            write_snapshot(dir.join(SNAPSHOT_FILE), &snap)?;
        }
        Ok(snap)
    }

    fn commit(&mut self, kind: OpKind, delta: Delta) -> Result<u64, RegistryError> {
        let seq = self.log.append(kind, &delta)?.seq;
        delta.apply(&mut self.state);
        Ok(seq)
    }

    fn next_id(&self, name: &str) -> u64 {
        self.view().counter(name) + 1
    }

    pub fn insert_citizen(&mut self, record: CitizenRecord) -> Result<u64, RegistryError> {
        self.insert_citizen_with(record, None)
    }

    /// Inserts a citizen, optionally storing their password credential in
    /// the same log entry.
    pub fn insert_citizen_with(
        &mut self,
        mut record: CitizenRecord,
        credential: Option<Credential>,
    ) -> Result<u64, RegistryError> {
        let nid = record.national_id;
        crate::nid::format_nid(&nid)?;
        if self.view().is_live(&nid) {
            return Err(RegistryError::DuplicateId(nid));
        }
        if let Some(c) = &credential {
            if c.principal != Principal::Citizen(nid) {
                return Err(RegistryError::InvalidRecord("credential principal does not match".into()));
            }
        }
        let did = self.next_id("information");
        record.did = did;
        let mut delta = Delta::new(nid.canonical())
            .with_put(citizen_key(&nid), encode(&StoredCitizen { version: 1, record }))
            .with_put(counter_key("information"), did.to_string());
        if let Some(c) = credential {
            delta = delta.with_put(credential_key(&c.principal), encode(&c));
        }
        self.commit(OpKind::Insert, delta)?;
        Ok(did)
    }

    pub fn insert_linked(&mut self, mut row: LinkedRecord) -> Result<u64, RegistryError> {
        let nid = row.national_id();
        if !self.view().is_live(&nid) {
            return Err(if self.view().is_archived(&nid) {
                RegistryError::ArchivedTarget(nid)
            } else {
                RegistryError::OrphanRecord(nid)
            });
        }
        row.check().map_err(RegistryError::InvalidRecord)?;
        let table = row.table();
        let id = self.next_id(table.short_name());
        row.set_id(id);
        let delta = Delta::new(nid.canonical())
            .with_put(linked_key(table, &nid, id), encode(&row))
            .with_put(counter_key(table.short_name()), id.to_string());
        self.commit(OpKind::InsertLinked, delta)?;
        Ok(id)
    }

    /// Applies column changes as a new version. Authorities may change
    /// any mutable column; a citizen only their own contact columns.
    pub fn update_citizen(
        &mut self,
        nid_text: &str,
        changes: &BTreeMap<String, String>,
        actor: &Principal,
    ) -> Result<u64, RegistryError> {
        let nid = parse_nid(nid_text.trim())?;
        if let Some(unknown) = changes.keys().find(|c| !CitizenRecord::has_column(c)) {
            return Err(RegistryError::UnknownField(unknown.clone()));
        }
        authorize(actor, Operation::Update, Some(&nid))?;
        if matches!(actor, Principal::Citizen(_))
            && changes.keys().any(|c| !CITIZEN_SELF_UPDATE_COLUMNS.contains(&c.as_str()))
        {
            return Err(RegistryError::AuthFailure);
        }
        if let Some(fixed) = changes.keys().find(|c| matches!(c.as_str(), "DID" | "National_ID" | "Death_date")) {
            return Err(FieldError { column: fixed.clone(), reason: "not updatable".into() }.into());
        }
        let mut stored = self.view().stored(&nid)?.ok_or(RegistryError::NoSuchCitizen)?;
        for (col, text) in changes {
            stored.record.set_field(col, text)?;
        }
        stored.version += 1;
        let version = stored.version;
        self.commit(OpKind::Update, Delta::new(nid.canonical()).with_put(citizen_key(&nid), encode(&stored)))?;
        Ok(version)
    }

    /// Moves a live citizen and all linked rows into the archive.
    pub fn archive_deceased(&mut self, nid_text: &str, death_date: NaiveDate) -> Result<ArchiveReceipt, RegistryError> {
        let nid = parse_nid(nid_text.trim())?;
        let view = self.view();
        let Some(stored) = view.stored(&nid)? else {
            return Err(if view.is_archived(&nid) {
                RegistryError::AlreadyArchived(nid)
            } else {
                RegistryError::NoSuchCitizen
            });
        };
        let linked = view.linked(&nid)?;
        let mut delta = Delta::new(nid.canonical()).with_del(citizen_key(&nid));
        for row in &linked {
            delta = delta.with_del(linked_key(row.table(), &nid, row.id()));
        }
        let mut record = stored.record;
        record.death_date = Some(death_date);
        let did = record.did;
        let bundle = ArchivedCitizen { record, linked };
        let key = archive_key(&nid, did);
        delta = delta.with_put(key.clone(), encode(&bundle));
        let linked_rows = bundle.linked.len();
        let seq = self.commit(OpKind::Archive, delta)?;
        let archive_entries = self.archive.append(&encode(&ArchiveLine { key, seq, bundle }))?;
        Ok(ArchiveReceipt { national_id: nid, did, death_date, linked_rows, seq, archive_entries })
    }

    /// Stores (or replaces) a credential in the replicated state.
    pub fn put_credential(&mut self, credential: &Credential) -> Result<u64, RegistryError> {
        let key = match &credential.principal {
            Principal::Citizen(nid) => nid.canonical(),
            other => other.key(),
        };
        self.commit(
            OpKind::Update,
            Delta::new(key).with_put(credential_key(&credential.principal), encode(credential)),
        )
    }

    pub fn verify_fields(
        &self,
        nid_text: &str,
        claims: &BTreeMap<String, String>,
    ) -> Result<VerificationReport, RegistryError> {
        self.view().verify_fields(nid_text, claims)
    }

    pub fn owner_lookup(
        &self,
        nid_text: &str,
        password: &str,
        extra: &impl CredentialSource,
    ) -> Result<FullRecord, RegistryError> {
        self.view().owner_lookup(nid_text, password, extra)
    }

    /// Every stored version of a citizen row, oldest first, read back from
    /// the log.
    pub fn history(&self, nid: &NationalId) -> Result<Vec<StoredCitizen>, RegistryError> {
        let key = citizen_key(nid);
        let canonical = nid.canonical();
        let mut out = Vec::new();
        for e in self.log.entries().iter().filter(|e| e.nid_key == canonical) {
            for (k, v) in e.delta()?.put {
                if k == key {
                    out.push(decode(&k, &v)?);
                }
            }
        }
        Ok(out)
    }

    /// Appends an entry produced by another replica and applies it.
    pub fn apply_replicated(&mut self, entry: LogEntry) -> Result<(), RegistryError> {
        let delta = entry.delta()?;
        let kind = entry.op_kind;
        let seq = entry.seq;
        self.log.push(entry)?;
        delta.apply(&mut self.state);
        if kind == OpKind::Archive {
            for (k, v) in delta.put.iter().filter(|(k, _)| k.starts_with("archive/")) {
                let line = encode(&ArchiveLine { key: k.clone(), seq, bundle: decode(k, v)? });
                self.archive.append(&line)?;
            }
        }
        Ok(())
    }

    #[cfg(test)]
    pub(crate) fn replace_state_for_test(&mut self, state: State) {
        self.state = state;
    }

    /// Drops log entries after `seq` and rebuilds the state from what is
    /// left.
    pub fn truncate_after(&mut self, seq: u64) -> Result<(), RegistryError> {
        self.log.truncate_after(seq)?;
        let mut state = State::new();
        replay(&mut state, self.log.entries())?;
        self.state = state;
        if self.dir.is_some() {
            // the snapshot may describe entries that no longer exist
            self.checkpoint()?;
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests;
