//! Request routing between local workers and the remote mirror, and the
//! timeout-counting failure detector that decides when local is down.

use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RouteTarget {
    LocalWorker(u32),
    Remote,
    Rejected,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RouteReason {
    Normal,
    Overflow,
    LocalDown,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct RouteDecision {
    pub target: RouteTarget,
    pub reason: RouteReason,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Health {
    Up,
    Down,
}

/// What the router needs to know about the local cluster.
#[derive(Debug, Clone, Copy)]
pub struct LocalLoad<'a> {
    /// Outstanding requests per active worker, indexed by worker id.
    pub worker_queues: &'a [(u32, usize)],
    pub queue_cap: usize,
}

impl LocalLoad<'_> {
    pub fn queue_depth(&self) -> usize {
        self.worker_queues.iter().map(|(_, q)| q).sum()
    }
}

/// Routes one request. Writes are never sent to an unpromoted remote, so
/// under overflow a write still goes to the least-loaded local worker.
pub fn route(is_write: bool, load: LocalLoad<'_>, local: Health, remote: Health) -> RouteDecision {
    let least_loaded = load.worker_queues.iter().min_by_key(|(id, q)| (*q, *id)).map(|(id, _)| *id);
    match (local, least_loaded) {
        (Health::Up, Some(worker)) => {
            if !is_write && load.queue_depth() >= load.queue_cap && remote == Health::Up {
                RouteDecision { target: RouteTarget::Remote, reason: RouteReason::Overflow }
            } else {
                RouteDecision { target: RouteTarget::LocalWorker(worker), reason: RouteReason::Normal }
            }
        }
        _ if remote == Health::Up => RouteDecision { target: RouteTarget::Remote, reason: RouteReason::LocalDown },
        _ => RouteDecision { target: RouteTarget::Rejected, reason: RouteReason::LocalDown },
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct DetectorConfig {
    /// Consecutive timeouts that mark the target down; the same number of
    /// consecutive successes mark it up again.
    pub k: u32,
    pub timeout_ms: u64,
}

impl Default for DetectorConfig {
    fn default() -> Self {
        DetectorConfig { k: 3, timeout_ms: 500 }
    }
}

/// Health transitions reported by the detector.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Transition {
    WentDown,
    CameUp,
}

#[derive(Debug, Clone)]
pub struct FailureDetector {
    config: DetectorConfig,
    health: Health,
    timeouts: u32,
    successes: u32,
}

impl FailureDetector {
    pub fn new(config: DetectorConfig) -> Self {
        FailureDetector { config, health: Health::Up, timeouts: 0, successes: 0 }
    }

    pub fn config(&self) -> DetectorConfig {
        self.config
    }

    pub fn health(&self) -> Health {
        self.health
    }

    /// Time from the first missed reply to the down verdict.
    pub fn detection_latency_ms(&self) -> u64 {
        u64::from(self.config.k) * self.config.timeout_ms
    }

    pub fn record_timeout(&mut self) -> Option<Transition> {
        self.successes = 0;
        self.timeouts = self.timeouts.saturating_add(1);
        if self.health == Health::Up && self.timeouts >= self.config.k {
            self.health = Health::Down;
            return Some(Transition::WentDown);
        }
        None
    }

    pub fn record_success(&mut self) -> Option<Transition> {
        self.timeouts = 0;
        self.successes = self.successes.saturating_add(1);
        if self.health == Health::Down && self.successes >= self.config.k {
            self.health = Health::Up;
            return Some(Transition::CameUp);
        }
        None
    }
}
