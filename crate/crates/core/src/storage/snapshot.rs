//! Snapshots of materialized state.
//!
//! File layout (little-endian):
//!
//! ```text
//! magic "BDPS" | version: u16 | upto_seq: u64 | state_hash: u64 | payload
//! ```
//!
//! The payload is the JSON-encoded key/value map.

use std::fs;
use std::io::Write;
use std::path::Path;

use super::{state_hash, Log, LogEntry, State, StorageError};

pub const SNAPSHOT_MAGIC: &[u8; 4] = b"BDPS";
pub const SNAPSHOT_VERSION: u16 = 1;
const HEADER_LEN: usize = 4 + 2 + 8 + 8;

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Snapshot {
    pub upto_seq: u64,
    pub state_hash: u64,
    pub blob: Vec<u8>,
}

impl Snapshot {
    pub fn from_state(upto_seq: u64, state: &State) -> Self {
        Snapshot {
            upto_seq,
            state_hash: state_hash(state),
            blob: serde_json::to_vec(state).expect("state serializes"),
        }
    }

    pub fn state(&self) -> Result<State, StorageError> {
        let state: State =
            serde_json::from_slice(&self.blob).map_err(|e| StorageError::BadSnapshot(e.to_string()))?;
        if state_hash(&state) != self.state_hash {
            return Err(StorageError::BadSnapshot("state hash mismatch".into()));
        }
        Ok(state)
    }

    pub fn encode(&self) -> Vec<u8> {
        let mut out = Vec::with_capacity(HEADER_LEN + self.blob.len());
        out.extend_from_slice(SNAPSHOT_MAGIC);
        out.extend_from_slice(&SNAPSHOT_VERSION.to_le_bytes());
        out.extend_from_slice(&self.upto_seq.to_le_bytes());
        out.extend_from_slice(&self.state_hash.to_le_bytes());
        out.extend_from_slice(&self.blob);
        out
    }

    pub fn decode(bytes: &[u8]) -> Result<Self, StorageError> {
        if bytes.len() < HEADER_LEN || &bytes[0..4] != SNAPSHOT_MAGIC {
            return Err(StorageError::BadSnapshot("missing magic".into()));
        }
        let version = u16::from_le_bytes([bytes[4], bytes[5]]);
        if version != SNAPSHOT_VERSION {
            return Err(StorageError::BadSnapshot(format!("unsupported version {version}")));
        }
        Ok(Snapshot {
            upto_seq: u64::from_le_bytes(bytes[6..14].try_into().unwrap()),
            state_hash: u64::from_le_bytes(bytes[14..22].try_into().unwrap()),
            blob: bytes[HEADER_LEN..].to_vec(),
        })
    }
}

/// Applies `entries` in order onto `state`.
pub fn replay<'a, I>(state: &mut State, entries: I) -> Result<(), StorageError>
where
    I: IntoIterator<Item = &'a LogEntry>,
{
    for entry in entries {
        entry.verify()?;
        entry.delta()?.apply(state);
    }
    Ok(())
}

/// Materializes the log prefix `seq <= upto_seq` from an empty state.
pub fn materialize(log: &Log, upto_seq: u64) -> Result<Snapshot, StorageError> {
    if upto_seq > log.last_seq() {
        return Err(StorageError::SeqOutOfRange { requested: upto_seq, max: log.last_seq() });
    }
    let mut state = State::new();
    replay(&mut state, log.range(0, upto_seq))?;
    Ok(Snapshot::from_state(upto_seq, &state))
}

/// Writes via a temporary file and rename so a crash never leaves a
/// half-written snapshot in place.
pub fn write_snapshot(path: impl AsRef<Path>, snapshot: &Snapshot) -> Result<(), StorageError> {
    let path = path.as_ref();
    let tmp = path.with_extension("tmp");
    {
        let mut f = fs::File::create(&tmp)?;
        f.write_all(&snapshot.encode())?;
        f.sync_all()?;
    }
    fs::rename(&tmp, path)?;
    Ok(())
}

pub fn read_snapshot(path: impl AsRef<Path>) -> Result<Snapshot, StorageError> {
    Snapshot::decode(&fs::read(path)?)
}
