//! Asynchronous log shipping from the local primary to the remote mirror,
//! promotion of the mirror when local fails, and resynchronization of the
//! local side once it is back.
//!
//! The local side keeps a [`Shipper`] cursor over its own log. The remote
//! side is a [`Mirror`]: a second [`Registry`] fed only by batches. Both are
//! plain values with no threads or clocks, so the same code runs inside the
//! simulator (batches carried by simulated links) and inside `serve`.

mod batch;
pub mod transport;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::registry::{Registry, RegistryError};
use crate::storage::Log;

pub use batch::Batch;

pub const DEFAULT_MAX_BATCH: usize = 64;

#[derive(Debug, Error)]
pub enum ReplicationError {
    #[error("batch starts at seq {found}, expected {expected}")]
    Gap { expected: u64, found: u64 },
    #[error("batch epoch {found} is older than current epoch {current}")]
    StaleEpoch { current: u32, found: u32 },
    #[error("remote is already promoted")]
    AlreadyPromoted,
    #[error("remote is not promoted")]
    NotPromoted,
    #[error("state hash mismatch after resync: local {local:#018x}, remote {remote:#018x}")]
    HashMismatch { local: u64, remote: u64 },
    #[error("malformed batch: {0}")]
    Malformed(String),
    #[error(transparent)]
    Registry(#[from] RegistryError),
    #[error("transport: {0}")]
    Io(#[from] std::io::Error),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Role {
    LocalPrimary,
    RemotePromoted,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PromoteReason {
    LocalFailure,
    Manual,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ReplicationMode {
    /// Writes are acknowledged as soon as the local log has them.
    #[default]
    Async,
    /// Writes are acknowledged once the remote has acked them.
    SemiSync,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct MirrorState {
    pub shipped_seq: u64,
    pub acked_seq: u64,
    pub applied_seq: u64,
    pub role: Role,
    pub epoch: u32,
}

/// Local-side shipping cursor. `shipped_seq` is the highest seq ever
/// sent; `cursor` is where the next batch starts and moves back to the
/// acked mark when acks go missing.
#[derive(Debug, Clone)]
pub struct Shipper {
    cursor: u64,
    shipped_seq: u64,
    acked_seq: u64,
    epoch: u32,
}

impl Shipper {
    /// A shipper whose remote already holds everything up to `seq`.
    pub fn caught_up(seq: u64, epoch: u32) -> Self {
        Shipper { cursor: seq, shipped_seq: seq, acked_seq: seq, epoch }
    }

    pub fn shipped_seq(&self) -> u64 {
        self.shipped_seq
    }

    pub fn acked_seq(&self) -> u64 {
        self.acked_seq
    }

    pub fn cursor(&self) -> u64 {
        self.cursor
    }

    pub fn epoch(&self) -> u32 {
        self.epoch
    }

    /// Entries `(from_seq, from_seq + max_batch]` of `log`. Empty when
    /// caught up.
    pub fn ship_batch(&mut self, log: &Log, from_seq: u64, max_batch: usize) -> Batch {
        let upto = from_seq.saturating_add(max_batch as u64);
        let entries = log.range(from_seq, upto).to_vec();
        if let Some(last) = entries.last() {
            self.cursor = last.seq;
            self.shipped_seq = self.shipped_seq.max(last.seq);
        }
        Batch { epoch: self.epoch, entries }
    }

    /// Next batch after the cursor.
    pub fn next_batch(&mut self, log: &Log, max_batch: usize) -> Batch {
        self.ship_batch(log, self.cursor, max_batch)
    }

    /// Entries not yet sent since the last rewind.
    pub fn pending(&self, log: &Log) -> u64 {
        log.last_seq().saturating_sub(self.cursor)
    }

    pub fn on_ack(&mut self, acked: u64) {
        self.acked_seq = self.acked_seq.max(acked.min(self.shipped_seq));
        self.cursor = self.cursor.max(self.acked_seq);
    }

    /// Forgets unacknowledged shipments so they go out again.
    pub fn rewind(&mut self) {
        self.cursor = self.acked_seq;
    }
}

/// What a promotion cost.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PromotionReport {
    pub epoch: u32,
    pub reason: PromoteReason,
    /// Last sequence the remote had applied; the new epoch starts after it.
    pub fork_seq: u64,
    /// Local entries the remote never applied (the recovery point gap).
    pub lost_seqs: Vec<u64>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ResyncReport {
    pub epoch: u32,
    pub discarded: u64,
    pub replayed: u64,
    pub state_hash: u64,
}

/// Remote side: a registry fed by batches, able to take over as primary.
#[derive(Debug)]
pub struct Mirror {
    registry: Registry,
    role: Role,
    epoch: u32,
    fork_seq: u64,
}

impl Mirror {
    pub fn new(registry: Registry) -> Self {
        Mirror { registry, role: Role::LocalPrimary, epoch: 1, fork_seq: 0 }
    }

    pub fn with_epoch(registry: Registry, role: Role, epoch: u32, fork_seq: u64) -> Self {
        Mirror { registry, role, epoch, fork_seq }
    }

    pub fn registry(&self) -> &Registry {
        &self.registry
    }

    pub fn role(&self) -> Role {
        self.role
    }

    pub fn epoch(&self) -> u32 {
        self.epoch
    }

    pub fn fork_seq(&self) -> u64 {
        self.fork_seq
    }

    pub fn applied_seq(&self) -> u64 {
        self.registry.last_seq()
    }

    /// Applies a shipped batch and returns the new acked seq. Entries the
    /// mirror already has are skipped; a batch starting past the next
    /// expected seq is a gap.
    pub fn apply_batch(&mut self, batch: &Batch) -> Result<u64, ReplicationError> {
        if batch.epoch < self.epoch || (self.role == Role::RemotePromoted && batch.epoch == self.epoch) {
            return Err(ReplicationError::StaleEpoch { current: self.epoch, found: batch.epoch });
        }
        let mut prev = None;
        for e in &batch.entries {
            if prev.is_some_and(|p| e.seq != p + 1) {
                return Err(ReplicationError::Gap { expected: prev.unwrap() + 1, found: e.seq });
            }
            prev = Some(e.seq);
        }
        for e in &batch.entries {
            let applied = self.applied_seq();
            if e.seq <= applied {
                continue;
            }
            if e.seq != applied + 1 {
                return Err(ReplicationError::Gap { expected: applied + 1, found: e.seq });
            }
            self.registry.apply_replicated(e.clone())?;
        }
        if batch.epoch > self.epoch {
            self.epoch = batch.epoch;
        }
        Ok(self.applied_seq())
    }

    /// Takes over as primary with a new epoch. Entries of `local_log` past
    /// the applied mark are reported as lost.
    pub fn promote(&mut self, reason: PromoteReason, local_log: &Log) -> Result<PromotionReport, ReplicationError> {
        if self.role == Role::RemotePromoted {
            return Err(ReplicationError::AlreadyPromoted);
        }
        self.role = Role::RemotePromoted;
        self.epoch += 1;
        self.fork_seq = self.applied_seq();
        let lost_seqs = local_log.range(self.fork_seq, local_log.last_seq()).iter().map(|e| e.seq).collect();
        Ok(PromotionReport { epoch: self.epoch, reason, fork_seq: self.fork_seq, lost_seqs })
    }

    /// Writes accepted while promoted go straight into the mirror.
    pub fn primary_mut(&mut self) -> Result<&mut Registry, ReplicationError> {
        match self.role {
            Role::RemotePromoted => Ok(&mut self.registry),
            Role::LocalPrimary => Err(ReplicationError::NotPromoted),
        }
    }

    /// Brings `local` back in line with the mirror: drops its entries past
    /// the fork point, replays the mirror's epoch entries and hands the
    /// primary role back. Returns the shipper the local side continues
    /// with.
    pub fn resync_local(&mut self, local: &mut Registry) -> Result<(ResyncReport, Shipper), ReplicationError> {
        if self.role != Role::RemotePromoted {
            return Err(ReplicationError::NotPromoted);
        }
        let discarded = local.last_seq().saturating_sub(self.fork_seq);
        local.truncate_after(self.fork_seq)?;
        let tail = self.registry.log().range(self.fork_seq, self.applied_seq()).to_vec();
        let replayed = tail.len() as u64;
        for e in tail {
            local.apply_replicated(e)?;
        }
        let (l, r) = (local.state_hash(), self.registry.state_hash());
        if l != r {
            return Err(ReplicationError::HashMismatch { local: l, remote: r });
        }
        self.role = Role::LocalPrimary;
        let report = ResyncReport { epoch: self.epoch, discarded, replayed, state_hash: l };
        Ok((report, Shipper::caught_up(self.applied_seq(), self.epoch)))
    }

    #[cfg(test)]
    pub(crate) fn registry_mut_for_test(&mut self) -> &mut Registry {
        &mut self.registry
    }
}

/// Both ends in one process with an instantaneous link. Used by `serve`
/// and by tests; the simulator drives [`Shipper`] and [`Mirror`] directly.
#[derive(Debug)]
pub struct ReplicatedPair {
    pub local: Registry,
    pub remote: Mirror,
    pub shipper: Shipper,
    pub mode: ReplicationMode,
    pub max_batch: usize,
}

impl ReplicatedPair {
    /// Pairs two registries. The remote must hold a prefix of the local
    /// log; shipping resumes from there.
    pub fn new(local: Registry, remote: Mirror, mode: ReplicationMode) -> Self {
        let shipper = match remote.role() {
            Role::LocalPrimary => Shipper::caught_up(remote.applied_seq().min(local.last_seq()), remote.epoch()),
            Role::RemotePromoted => Shipper::caught_up(local.last_seq(), remote.epoch()),
        };
        ReplicatedPair { local, remote, shipper, mode, max_batch: DEFAULT_MAX_BATCH }
    }

    pub fn state(&self) -> MirrorState {
        MirrorState {
            shipped_seq: self.shipper.shipped_seq(),
            acked_seq: self.shipper.acked_seq(),
            applied_seq: self.remote.applied_seq(),
            role: self.remote.role(),
            epoch: self.remote.epoch(),
        }
    }

    pub fn role(&self) -> Role {
        self.remote.role()
    }

    /// The registry that currently takes writes.
    pub fn primary(&self) -> &Registry {
        match self.remote.role() {
            Role::LocalPrimary => &self.local,
            Role::RemotePromoted => self.remote.registry(),
        }
    }

    pub fn primary_mut(&mut self) -> &mut Registry {
        match self.remote.role() {
            Role::LocalPrimary => &mut self.local,
            Role::RemotePromoted => &mut self.remote.registry,
        }
    }

    /// Ships until the remote has acked the whole local log. Returns the
    /// number of entries shipped.
    pub fn pump(&mut self) -> Result<u64, ReplicationError> {
        if self.remote.role() != Role::LocalPrimary {
            return Ok(0);
        }
        let mut shipped = 0;
        loop {
            let batch = self.shipper.next_batch(self.local.log(), self.max_batch);
            if batch.is_empty() {
                return Ok(shipped);
            }
            shipped += batch.entries.len() as u64;
            let acked = self.remote.apply_batch(&batch)?;
            self.shipper.on_ack(acked);
        }
    }

    /// Called after every local write; semi-synchronous mode ships before
    /// the write is acknowledged.
    pub fn after_write(&mut self) -> Result<(), ReplicationError> {
        if self.mode == ReplicationMode::SemiSync {
            self.pump()?;
        }
        Ok(())
    }

    pub fn promote(&mut self, reason: PromoteReason) -> Result<PromotionReport, ReplicationError> {
        self.remote.promote(reason, self.local.log())
    }

    pub fn resync(&mut self) -> Result<ResyncReport, ReplicationError> {
        let (report, shipper) = self.remote.resync_local(&mut self.local)?;
        self.shipper = shipper;
        Ok(report)
    }
}
