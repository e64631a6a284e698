//! What a run produces: per-request records, the event log, the worker
//! trace and the aggregate figures derived from them.

use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use super::scenario::{FaultKind, Site};
use super::workload::Op;
use crate::elasticity::{metrics_csv, MetricsRow};
use crate::gateway::routing::RouteReason;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Outcome {
    /// Answered with a result.
    Ok,
    /// Answered with a domain error (unknown id, wrong password, ...).
    DomainError,
    /// A site answered that it could not serve the request.
    Unavailable,
    /// No answer before the client timeout.
    Timeout,
    /// The gateway had nowhere to send it.
    Rejected,
    /// Still outstanding at the horizon.
    InFlight,
}

impl Outcome {
    pub fn answered(self) -> bool {
        matches!(self, Outcome::Ok | Outcome::DomainError)
    }

    pub fn name(self) -> &'static str {
        match self {
            Outcome::Ok => "ok",
            Outcome::DomainError => "domain_error",
            Outcome::Unavailable => "unavailable",
            Outcome::Timeout => "timeout",
            Outcome::Rejected => "rejected",
            Outcome::InFlight => "in_flight",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RequestRecord {
    pub id: u64,
    pub op: Op,
    pub arrived_us: u64,
    pub finished_us: Option<u64>,
    pub route: RouteReason,
    pub served_by: Option<Site>,
    /// Served by the mirror while it was not the primary.
    pub possibly_stale: bool,
    pub outcome: Outcome,
}

impl RequestRecord {
    pub fn latency_us(&self) -> Option<u64> {
        self.finished_us.map(|f| f - self.arrived_us)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "event", rename_all = "snake_case")]
pub enum LogEvent {
    Fault { kind: FaultKind, target: String, undo: bool },
    Commit { site: Site, seq: u64, epoch: u32 },
    Ship { first: u64, last: u64, epoch: u32 },
    Applied { applied: u64, epoch: u32 },
    BatchRejected { reason: String },
    AckReceived { acked: u64 },
    Rewind { to: u64 },
    Detector { site: Site, down: bool },
    Promote { epoch: u32, fork_seq: u64, lost_seqs: Vec<u64> },
    Resync { epoch: u32, discarded: u64, replayed: u64, state_hash: String },
    ResyncFailed { reason: String },
    Scale { up: bool, workers: u32, active: u32 },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LogRecord {
    pub at_us: u64,
    #[serde(flatten)]
    pub event: LogEvent,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricsReport {
    pub scenario: String,
    pub seed: u64,
    pub horizon_ms: u64,
    pub arrivals: u64,
    pub served_local: u64,
    pub served_remote: u64,
    pub unavailable: u64,
    pub timed_out: u64,
    pub rejected: u64,
    pub in_flight: u64,
    /// Answered over finished requests.
    pub availability: f64,
    pub p50_ms: f64,
    pub p99_ms: f64,
    pub lost_writes: u64,
    pub promotions: u64,
    pub resyncs: u64,
    pub billed_units: u64,
    pub local_last_seq: u64,
    pub remote_applied_seq: u64,
    pub local_state_hash: u64,
    pub remote_state_hash: u64,
    pub worker_trace: Vec<MetricsRow>,
    pub requests: Vec<RequestRecord>,
    pub events: Vec<LogRecord>,
}

fn ms(us: u64) -> String {
    format!("{}.{:03}", us / 1000, us % 1000)
}

/// Nearest-rank percentile of sorted values.
pub fn percentile(sorted: &[u64], p: f64) -> Option<u64> {
    if sorted.is_empty() {
        return None;
    }
    let rank = ((p / 100.0) * sorted.len() as f64).ceil() as usize;
    Some(sorted[rank.clamp(1, sorted.len()) - 1])
}

impl MetricsReport {
    /// Fills the aggregate fields from the records.
    pub(crate) fn tally(&mut self) {
        let count = |o: Outcome| self.requests.iter().filter(|r| r.outcome == o).count() as u64;
        self.arrivals = self.requests.len() as u64;
        self.unavailable = count(Outcome::Unavailable);
        self.timed_out = count(Outcome::Timeout);
        self.rejected = count(Outcome::Rejected);
        self.in_flight = count(Outcome::InFlight);
        let served = |s: Site| {
            self.requests.iter().filter(|r| r.outcome.answered() && r.served_by == Some(s)).count() as u64
        };
        self.served_local = served(Site::Local);
        self.served_remote = served(Site::Remote);
        let finished = self.arrivals - self.in_flight;
        let answered = self.served_local + self.served_remote;
        self.availability = if finished == 0 { 1.0 } else { answered as f64 / finished as f64 };
        let mut lat: Vec<u64> =
            self.requests.iter().filter(|r| r.outcome.answered()).filter_map(|r| r.latency_us()).collect();
        lat.sort_unstable();
        self.p50_ms = percentile(&lat, 50.0).map_or(0.0, |v| v as f64 / 1000.0);
        self.p99_ms = percentile(&lat, 99.0).map_or(0.0, |v| v as f64 / 1000.0);
        self.lost_writes = 0;
        self.promotions = 0;
        self.resyncs = 0;
        for e in &self.events {
            match &e.event {
                LogEvent::Promote { lost_seqs, .. } => {
                    self.promotions += 1;
                    self.lost_writes += lost_seqs.len() as u64;
                }
                LogEvent::Resync { .. } => self.resyncs += 1,
                _ => {}
            }
        }
    }

    /// The per-second controller trace.
    pub fn metrics_csv(&self) -> String {
        metrics_csv(&self.worker_trace)
    }

    pub fn requests_csv(&self) -> String {
        let mut out = String::from("id,op,arrived_ms,finished_ms,route,served_by,possibly_stale,outcome\n");
        for r in &self.requests {
            let route = match r.route {
                RouteReason::Normal => "normal",
                RouteReason::Overflow => "overflow",
                RouteReason::LocalDown => "local_down",
            };
            let _ = writeln!(
                out,
                "{},{},{},{},{},{},{},{}",
                r.id,
                r.op.name(),
                ms(r.arrived_us),
                r.finished_us.map(ms).unwrap_or_default(),
                route,
                r.served_by.map_or("", Site::name),
                r.possibly_stale,
                r.outcome.name()
            );
        }
        out
    }

    pub fn events_jsonl(&self) -> String {
        let mut out = String::new();
        for e in &self.events {
            out.push_str(&serde_json::to_string(e).expect("log record serializes"));
            out.push('\n');
        }
        out
    }

    pub fn summary(&self) -> String {
        let mut s = String::new();
        let _ = writeln!(s, "scenario: {}", self.scenario);
        let _ = writeln!(s, "seed: {}", self.seed);
        let _ = writeln!(s, "horizon_ms: {}", self.horizon_ms);
        let _ = writeln!(s, "arrivals: {}", self.arrivals);
        let _ = writeln!(s, "served_local: {}", self.served_local);
        let _ = writeln!(s, "served_remote: {}", self.served_remote);
        let _ = writeln!(s, "unavailable: {}", self.unavailable);
        let _ = writeln!(s, "timed_out: {}", self.timed_out);
        let _ = writeln!(s, "rejected: {}", self.rejected);
        let _ = writeln!(s, "in_flight: {}", self.in_flight);
        let _ = writeln!(s, "availability: {:.6}", self.availability);
        let _ = writeln!(s, "p50_ms: {:.3}", self.p50_ms);
        let _ = writeln!(s, "p99_ms: {:.3}", self.p99_ms);
        let _ = writeln!(s, "lost_writes: {}", self.lost_writes);
        let _ = writeln!(s, "promotions: {}", self.promotions);
        let _ = writeln!(s, "resyncs: {}", self.resyncs);
        let _ = writeln!(s, "billed_units: {}", self.billed_units);
        let peak = self.worker_trace.iter().map(|r| r.active_workers).max().unwrap_or(0);
        let _ = writeln!(s, "peak_workers: {peak}");
        let _ = writeln!(s, "local_last_seq: {}", self.local_last_seq);
        let _ = writeln!(s, "remote_applied_seq: {}", self.remote_applied_seq);
        let _ = writeln!(s, "local_state_hash: {:016x}", self.local_state_hash);
        let _ = writeln!(s, "remote_state_hash: {:016x}", self.remote_state_hash);
        s
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn nearest_rank() {
        let v: Vec<u64> = (1..=100).collect();
        assert_eq!(percentile(&v, 50.0), Some(50));
        assert_eq!(percentile(&v, 99.0), Some(99));
        assert_eq!(percentile(&[7], 99.0), Some(7));
        assert_eq!(percentile(&[], 50.0), None);
    }

    #[test]
    fn ms_formatting() {
        assert_eq!(ms(1_234_567), "1234.567");
        assert_eq!(ms(5), "0.005");
    }
}
