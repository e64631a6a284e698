//! Log-structured storage engine.
//!
//! Every mutation is a [`Delta`] (puts and deletes on a string key space)
//! appended to a [`Log`]. Replaying the log in order materializes a
//! [`State`]; snapshots capture that state together with its
//! [`state_hash`] so replicas can be compared cheaply.

mod cluster;
mod hash;
mod log;
mod placement;
mod snapshot;

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use cluster::{NodeStatus, StorageCluster};
pub use hash::{fmix64, fnv1a64, hash64, state_hash, EMPTY_STATE_HASH};
pub use log::{crc32, Log, LogEntry, OpKind, FRAME_HEADER_LEN, FRAME_TRAILER_LEN};
pub use placement::{place_replicas, NodeId, ReplicaPlacement, DEFAULT_REPLICATION_FACTOR};
pub use snapshot::{materialize, read_snapshot, replay, write_snapshot, Snapshot, SNAPSHOT_MAGIC, SNAPSHOT_VERSION};

/// Materialized key space. Sorted so iteration order is canonical.
pub type State = BTreeMap<String, String>;

#[derive(Debug, Error)]
pub enum StorageError {
    #[error("i/o: {0}")]
    Io(#[from] std::io::Error),
    #[error("log is full ({capacity} bytes)")]
    StorageFull { capacity: u64 },
    #[error("checksum mismatch in entry {seq}")]
    Checksum { seq: u64 },
    #[error("undecodable entry {seq}")]
    Decode { seq: u64 },
    #[error("expected seq {expected}, found {found}")]
    OutOfOrder { expected: u64, found: u64 },
    #[error("seq {requested} is beyond the log tail {max}")]
    SeqOutOfRange { requested: u64, max: u64 },
    #[error("no live nodes")]
    NoNodes,
    #[error("write reached {acks} of {needed} required replicas")]
    QuorumUnavailable { acks: usize, needed: usize },
    #[error("no live replica holds {key}")]
    NoLiveReplica { key: String },
    #[error("unknown node {0}")]
    UnknownNode(NodeId),
    #[error("bad snapshot: {0}")]
    BadSnapshot(String),
}

/// One logical mutation. `key` is the national id the mutation belongs to.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Delta {
    pub key: String,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub put: Vec<(String, String)>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub del: Vec<String>,
}

impl Delta {
    pub fn new(key: impl Into<String>) -> Self {
        Delta { key: key.into(), put: Vec::new(), del: Vec::new() }
    }

    pub fn put<I>(key: impl Into<String>, puts: I) -> Self
    where
        I: IntoIterator<Item = (String, String)>,
    {
        Delta { key: key.into(), put: puts.into_iter().collect(), del: Vec::new() }
    }

    pub fn with_put(mut self, k: impl Into<String>, v: impl Into<String>) -> Self {
        self.put.push((k.into(), v.into()));
        self
    }

    pub fn with_del(mut self, k: impl Into<String>) -> Self {
        self.del.push(k.into());
        self
    }

    /// Deletes first, then puts.
    pub fn apply(&self, state: &mut State) {
        for k in &self.del {
            state.remove(k);
        }
        for (k, v) in &self.put {
            state.insert(k.clone(), v.clone());
        }
    }

    pub fn encode(&self) -> Vec<u8> {
        serde_json::to_vec(self).expect("delta serializes")
    }

    pub fn decode(bytes: &[u8]) -> Result<Self, serde_json::Error> {
        serde_json::from_slice(bytes)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn delta_applies_deletes_before_puts() {
        let mut s = State::new();
        s.insert("a".into(), "1".into());
        Delta::new("n").with_del("a").with_put("a", "2").with_put("b", "3").apply(&mut s);
        assert_eq!(s.get("a").map(String::as_str), Some("2"));
        assert_eq!(s.len(), 2);
    }

    #[test]
    fn delta_encoding_round_trips() {
        let d = Delta::new("2615481234567").with_put("citizen/x", "{\"a\":1}").with_del("y");
        assert_eq!(Delta::decode(&d.encode()).unwrap(), d);
    }
}
