//! Rendezvous (highest random weight) replica placement.

use std::collections::BTreeSet;
use std::fmt;

use serde::{Deserialize, Serialize};

use super::{hash64, StorageError};

pub const DEFAULT_REPLICATION_FACTOR: usize = 3;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct NodeId(pub u32);

impl fmt::Display for NodeId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "node-{}", self.0)
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ReplicaPlacement {
    pub nid_key: String,
    /// Highest score first; the first entry is the primary replica.
    pub replicas: Vec<NodeId>,
}

/// `hash64(key bytes ‖ node id as u32 LE)`.
pub fn score(nid_key: &str, node: NodeId) -> u64 {
    let mut buf = Vec::with_capacity(nid_key.len() + 4);
    buf.extend_from_slice(nid_key.as_bytes());
    buf.extend_from_slice(&node.0.to_le_bytes());
    hash64(&buf)
}

/// Picks `min(r, |live_nodes|)` distinct nodes with the highest scores.
/// Equal scores go to the lower node id.
pub fn place_replicas(
    nid_key: &str,
    live_nodes: &BTreeSet<NodeId>,
    r: usize,
) -> Result<ReplicaPlacement, StorageError> {
    if live_nodes.is_empty() {
        return Err(StorageError::NoNodes);
    }
    let mut scored: Vec<(u64, NodeId)> = live_nodes.iter().map(|n| (score(nid_key, *n), *n)).collect();
    scored.sort_by(|a, b| b.0.cmp(&a.0).then(a.1.cmp(&b.1)));
    Ok(ReplicaPlacement {
        nid_key: nid_key.to_string(),
        replicas: scored.into_iter().take(r.min(live_nodes.len())).map(|(_, n)| n).collect(),
    })
}
