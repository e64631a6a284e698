//! Record replicas spread over the local storage nodes.
//!
//! Placement is computed over the configured membership, not the live
//! subset, so a crashed node keeps its slot and its keys are served by the
//! surviving replicas. A write needs a majority of its placement set to be
//! live (2 of 3 by default) and goes to every live replica.

use std::collections::{BTreeMap, BTreeSet};

use super::{place_replicas, NodeId, ReplicaPlacement, StorageError};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum NodeStatus {
    Up,
    Crashed,
}

#[derive(Debug, Clone, Default)]
struct NodeStore {
    /// key -> (version, value)
    data: BTreeMap<String, (u64, String)>,
}

#[derive(Debug, Clone)]
pub struct StorageCluster {
    members: BTreeSet<NodeId>,
    status: BTreeMap<NodeId, NodeStatus>,
    stores: BTreeMap<NodeId, NodeStore>,
    replication_factor: usize,
    next_version: u64,
}

impl StorageCluster {
    pub fn new(node_count: u32, replication_factor: usize) -> Self {
        let members: BTreeSet<NodeId> = (0..node_count).map(NodeId).collect();
        StorageCluster {
            status: members.iter().map(|n| (*n, NodeStatus::Up)).collect(),
            stores: members.iter().map(|n| (*n, NodeStore::default())).collect(),
            members,
            replication_factor: replication_factor.max(1),
            next_version: 1,
        }
    }

    pub fn members(&self) -> &BTreeSet<NodeId> {
        &self.members
    }

    pub fn replication_factor(&self) -> usize {
        self.replication_factor
    }

    pub fn live_nodes(&self) -> BTreeSet<NodeId> {
        self.status.iter().filter(|(_, s)| **s == NodeStatus::Up).map(|(n, _)| *n).collect()
    }

    pub fn any_live(&self) -> bool {
        self.status.values().any(|s| *s == NodeStatus::Up)
    }

    pub fn status(&self, node: NodeId) -> Option<NodeStatus> {
        self.status.get(&node).copied()
    }

    pub fn crash(&mut self, node: NodeId) -> Result<(), StorageError> {
        *self.status.get_mut(&node).ok_or(StorageError::UnknownNode(node))? = NodeStatus::Crashed;
        Ok(())
    }

    pub fn repair(&mut self, node: NodeId) -> Result<(), StorageError> {
        *self.status.get_mut(&node).ok_or(StorageError::UnknownNode(node))? = NodeStatus::Up;
        Ok(())
    }

    pub fn placement(&self, key: &str) -> Result<ReplicaPlacement, StorageError> {
        place_replicas(key, &self.members, self.replication_factor)
    }

    fn is_up(&self, node: NodeId) -> bool {
        self.status.get(&node) == Some(&NodeStatus::Up)
    }

    /// Whether a write for `key` would currently reach quorum.
    pub fn can_write(&self, key: &str) -> bool {
        self.placement(key).is_ok_and(|p| {
            p.replicas.iter().filter(|n| self.is_up(**n)).count() > p.replicas.len() / 2
        })
    }

    pub fn can_read(&self, key: &str) -> bool {
        self.placement(key).is_ok_and(|p| p.replicas.iter().any(|n| self.is_up(*n)))
    }

    /// Returns the nodes that acknowledged.
    pub fn write(&mut self, key: &str, value: &str) -> Result<Vec<NodeId>, StorageError> {
        let placement = self.placement(key)?;
        let live: Vec<NodeId> = placement.replicas.iter().copied().filter(|n| self.is_up(*n)).collect();
        let needed = placement.replicas.len() / 2 + 1;
        if live.len() < needed {
            return Err(StorageError::QuorumUnavailable { acks: live.len(), needed });
        }
        let version = self.next_version;
        self.next_version += 1;
        for node in &live {
            self.stores
                .get_mut(node)
                .expect("member has a store")
                .data
                .insert(key.to_string(), (version, value.to_string()));
        }
        Ok(live)
    }

    /// Newest value among the live replicas. `Ok(None)` if the key was
    /// never written.
    pub fn read(&self, key: &str) -> Result<Option<&str>, StorageError> {
        let placement = self.placement(key)?;
        let mut any_live = false;
        let mut best: Option<&(u64, String)> = None;
        for node in placement.replicas.iter().filter(|n| self.is_up(**n)) {
            any_live = true;
            if let Some(v) = self.stores[node].data.get(key) {
                if best.is_none_or(|b| v.0 > b.0) {
                    best = Some(v);
                }
            }
        }
        if !any_live {
            return Err(StorageError::NoLiveReplica { key: key.to_string() });
        }
        Ok(best.map(|(_, v)| v.as_str()))
    }

    /// Number of keys stored on `node` (including stale copies).
    pub fn node_key_count(&self, node: NodeId) -> usize {
        self.stores.get(&node).map_or(0, |s| s.data.len())
    }
}
