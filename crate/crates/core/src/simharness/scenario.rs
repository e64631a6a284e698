//! Scenario documents (TOML).
//!
//! ```toml
//! name = "failover"
//! seed = 7
//! horizon_ms = 86400000
//!
//! [topology]            # defaults shown
//! local_nodes = 5
//! remote_nodes = 2
//! replication_factor = 3
//! lan_latency_ms = 1.0
//! wan_latency_ms = 20.0
//!
//! [workload]
//! profile = "year1"     # year1 | year3 | year5 | idle
//! scale_factor = 1000.0
//! initial_population = 1000
//! # requests_per_day = 250000
//! # mix = { verify = 0.8, owner_lookup = 0.1, insert = 0.05, update = 0.05 }
//! # steps = [{ at_ms = 0, rate = 0.0 }, { at_ms = 60000, rate = 250.0 }]
//!
//! [policy]              # autoscaler policy, same keys as the service config
//! [replication]         # mode, ship_interval_ms, max_batch, ack_timeout_ms
//! [detector]            # k, timeout_ms, probe_interval_ms
//! [gateway]             # request_timeout_ms, auto_promote, auto_resync
//!
//! [[faults]]
//! at_ms = 30000
//! kind = "node_crash"   # node_crash | node_repair | partition | heal | congest
//! target = "local-*"    # local-N, remote-N, local-*, remote-*, a->b, a<->b
//! # duration_ms = 5000  # undo the fault after this long
//! # added_latency_ms = 200  (congest only)
//! ```

use serde::{Deserialize, Serialize};

use super::workload::{Mix, RateStep, WorkloadProfile, DAY_MS};
use super::SimError;
use crate::elasticity::ScalePolicy;
use crate::gateway::routing::DetectorConfig;
use crate::replication::{ReplicationMode, DEFAULT_MAX_BATCH};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct Scenario {
    pub name: String,
    pub seed: u64,
    pub horizon_ms: u64,
    pub topology: Topology,
    pub workload: WorkloadSpec,
    pub policy: ScalePolicy,
    pub replication: ReplicationSpec,
    pub detector: DetectorSpec,
    pub gateway: GatewaySpec,
    pub faults: Vec<FaultSpec>,
}

impl Default for Scenario {
    fn default() -> Self {
        Scenario {
            name: "unnamed".into(),
            seed: 0,
            horizon_ms: DAY_MS,
            topology: Topology::default(),
            workload: WorkloadSpec::default(),
            policy: ScalePolicy::default(),
            replication: ReplicationSpec::default(),
            detector: DetectorSpec::default(),
            gateway: GatewaySpec::default(),
            faults: Vec::new(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct Topology {
    pub local_nodes: u32,
    pub remote_nodes: u32,
    pub replication_factor: usize,
    pub lan_latency_ms: f64,
    pub wan_latency_ms: f64,
}

impl Default for Topology {
    fn default() -> Self {
        Topology { local_nodes: 5, remote_nodes: 2, replication_factor: 3, lan_latency_ms: 1.0, wan_latency_ms: 20.0 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct WorkloadSpec {
    pub profile: String,
    pub requests_per_day: Option<f64>,
    pub scale_factor: f64,
    pub initial_population: u64,
    pub mix: Mix,
    pub steps: Vec<RateStep>,
}

impl Default for WorkloadSpec {
    fn default() -> Self {
        WorkloadSpec {
            profile: "year1".into(),
            requests_per_day: None,
            scale_factor: 1000.0,
            initial_population: 1000,
            mix: Mix::default(),
            steps: Vec::new(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ReplicationSpec {
    pub mode: ReplicationMode,
    pub ship_interval_ms: u64,
    pub max_batch: usize,
    /// Unacknowledged batches are re-sent after this long.
    pub ack_timeout_ms: u64,
}

impl Default for ReplicationSpec {
    fn default() -> Self {
        ReplicationSpec { mode: ReplicationMode::Async, ship_interval_ms: 100, max_batch: DEFAULT_MAX_BATCH, ack_timeout_ms: 1000 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct DetectorSpec {
    pub k: u32,
    pub timeout_ms: u64,
    pub probe_interval_ms: u64,
}

impl Default for DetectorSpec {
    fn default() -> Self {
        let d = DetectorConfig::default();
        DetectorSpec { k: d.k, timeout_ms: d.timeout_ms, probe_interval_ms: d.timeout_ms }
    }
}

impl DetectorSpec {
    pub fn config(&self) -> DetectorConfig {
        DetectorConfig { k: self.k, timeout_ms: self.timeout_ms }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct GatewaySpec {
    pub request_timeout_ms: u64,
    pub auto_promote: bool,
    pub auto_resync: bool,
}

impl Default for GatewaySpec {
    fn default() -> Self {
        GatewaySpec { request_timeout_ms: 2000, auto_promote: true, auto_resync: true }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FaultKind {
    NodeCrash,
    NodeRepair,
    Partition,
    Heal,
    Congest,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FaultSpec {
    pub at_ms: u64,
    pub kind: FaultKind,
    pub target: String,
    #[serde(default)]
    pub duration_ms: Option<u64>,
    #[serde(default)]
    pub added_latency_ms: Option<f64>,
}

impl FaultSpec {
    pub fn new(at_ms: u64, kind: FaultKind, target: &str) -> Self {
        FaultSpec { at_ms, kind, target: target.to_string(), duration_ms: None, added_latency_ms: None }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Site {
    Gateway,
    Local,
    Remote,
}

impl Site {
    fn parse(s: &str) -> Option<Site> {
        match s {
            "gateway" => Some(Site::Gateway),
            "local" => Some(Site::Local),
            "remote" => Some(Site::Remote),
            _ => None,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Site::Gateway => "gateway",
            Site::Local => "local",
            Site::Remote => "remote",
        }
    }
}

/// A directed link between two sites.
pub type Link = (Site, Site);

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Target {
    /// Node indices of one site.
    Nodes(Site, Vec<u32>),
    Links(Vec<Link>),
}

impl Topology {
    pub fn validate(&self) -> Result<(), SimError> {
        if self.local_nodes == 0 || self.remote_nodes == 0 {
            return Err(SimError::Config("topology: each site needs at least one node".into()));
        }
        if self.replication_factor == 0 || self.replication_factor > self.local_nodes as usize {
            return Err(SimError::Config(format!(
                "topology.replication_factor {} must be between 1 and local_nodes ({})",
                self.replication_factor, self.local_nodes
            )));
        }
        for (name, v) in [("lan_latency_ms", self.lan_latency_ms), ("wan_latency_ms", self.wan_latency_ms)] {
            if !(v >= 0.0 && v.is_finite()) {
                return Err(SimError::Config(format!("topology.{name} must be non-negative")));
            }
        }
        Ok(())
    }

    /// Resolves a fault target name.
    pub fn resolve(&self, target: &str) -> Result<Target, SimError> {
        let unknown = || SimError::UnknownTarget(target.to_string());
        if let Some((a, b)) = target.split_once("<->") {
            let (a, b) = (Site::parse(a).ok_or_else(unknown)?, Site::parse(b).ok_or_else(unknown)?);
            return if a == b { Err(unknown()) } else { Ok(Target::Links(vec![(a, b), (b, a)])) };
        }
        if let Some((a, b)) = target.split_once("->") {
            let (a, b) = (Site::parse(a).ok_or_else(unknown)?, Site::parse(b).ok_or_else(unknown)?);
            return if a == b { Err(unknown()) } else { Ok(Target::Links(vec![(a, b)])) };
        }
        let (site, index) = target.split_once('-').ok_or_else(unknown)?;
        let site = Site::parse(site).ok_or_else(unknown)?;
        let count = match site {
            Site::Local => self.local_nodes,
            Site::Remote => self.remote_nodes,
            Site::Gateway => return Err(unknown()),
        };
        if index == "*" {
            return Ok(Target::Nodes(site, (0..count).collect()));
        }
        match index.parse::<u32>() {
            Ok(i) if i < count && !index.starts_with('+') => Ok(Target::Nodes(site, vec![i])),
            _ => Err(unknown()),
        }
    }
}

impl FaultSpec {
    /// Checks the target exists and suits the fault kind.
    pub fn resolve(&self, topology: &Topology) -> Result<Target, SimError> {
        let target = topology.resolve(&self.target)?;
        let node_fault = matches!(self.kind, FaultKind::NodeCrash | FaultKind::NodeRepair);
        match (&target, node_fault) {
            (Target::Nodes(..), true) | (Target::Links(_), false) => {}
            _ => {
                return Err(SimError::Config(format!(
                    "fault at {} ms: {:?} cannot target {}",
                    self.at_ms, self.kind, self.target
                )))
            }
        }
        match (self.kind, self.added_latency_ms) {
            (FaultKind::Congest, Some(l)) if l >= 0.0 && l.is_finite() => {}
            (FaultKind::Congest, _) => {
                return Err(SimError::Config(format!(
                    "fault at {} ms: congest needs added_latency_ms >= 0",
                    self.at_ms
                )))
            }
            (_, Some(_)) => {
                return Err(SimError::Config(format!(
                    "fault at {} ms: added_latency_ms only applies to congest",
                    self.at_ms
                )))
            }
            _ => {}
        }
        Ok(target)
    }
}

impl Scenario {
    pub fn parse(text: &str) -> Result<Scenario, SimError> {
        let scenario: Scenario = toml::from_str(text)?;
        scenario.validate()?;
        Ok(scenario)
    }

    pub fn validate(&self) -> Result<(), SimError> {
        self.topology.validate()?;
        self.policy.validate()?;
        if WorkloadProfile::named(&self.workload.profile).is_none() && self.workload.requests_per_day.is_none() {
            return Err(SimError::Config(format!(
                "workload.profile: unknown profile {:?} (set requests_per_day for a custom one)",
                self.workload.profile
            )));
        }
        self.profile().validate()?;
        if self.replication.ship_interval_ms == 0 || self.replication.max_batch == 0 || self.replication.ack_timeout_ms == 0 {
            return Err(SimError::Config("replication: intervals and max_batch must be positive".into()));
        }
        if self.detector.k == 0 || self.detector.timeout_ms == 0 || self.detector.probe_interval_ms == 0 {
            return Err(SimError::Config("detector: k, timeout_ms and probe_interval_ms must be positive".into()));
        }
        if self.gateway.request_timeout_ms == 0 {
            return Err(SimError::Config("gateway.request_timeout_ms must be positive".into()));
        }
        for f in &self.faults {
            f.resolve(&self.topology)?;
        }
        Ok(())
    }

    /// The workload profile this scenario replays, seeded with `self.seed`.
    pub fn profile(&self) -> WorkloadProfile {
        let w = &self.workload;
        let base = WorkloadProfile::named(&w.profile).unwrap_or_else(|| WorkloadProfile {
            name: w.profile.clone(),
            requests_per_day: f64::NAN,
            mix: Mix::default(),
            scale_factor: 1000.0,
            seed: 0,
            steps: Vec::new(),
        });
        WorkloadProfile {
            requests_per_day: w.requests_per_day.unwrap_or(base.requests_per_day),
            mix: w.mix,
            scale_factor: w.scale_factor,
            seed: self.seed,
            steps: w.steps.clone(),
            ..base
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn empty_document_is_all_defaults() {
        let s = Scenario::parse("").unwrap();
        assert_eq!(s, Scenario::default());
        assert_eq!(s.profile().requests_per_day, 100_000.0);
    }

    #[test]
    fn parses_faults() {
        let s = Scenario::parse(
            r#"
            name = "x"
            [[faults]]
            at_ms = 30000
            kind = "node_crash"
            target = "local-*"
            [[faults]]
            at_ms = 1000
            kind = "congest"
            target = "local->remote"
            added_latency_ms = 200
            duration_ms = 5000
            "#,
        )
        .unwrap();
        assert_eq!(s.faults.len(), 2);
        assert_eq!(s.faults[0].resolve(&s.topology).unwrap(), Target::Nodes(Site::Local, vec![0, 1, 2, 3, 4]));
        assert_eq!(s.faults[1].resolve(&s.topology).unwrap(), Target::Links(vec![(Site::Local, Site::Remote)]));
    }

    #[test]
    fn unknown_targets() {
        let t = Topology::default();
        for bad in ["local-5", "remote-2", "gateway-0", "moon-1", "local", "local->local", "local->moon", "local-+1"] {
            assert!(matches!(t.resolve(bad), Err(SimError::UnknownTarget(_))), "{bad}");
        }
        assert_eq!(t.resolve("remote<->local").unwrap(), Target::Links(vec![(Site::Remote, Site::Local), (Site::Local, Site::Remote)]));
    }

    #[test]
    fn rejects_malformed_documents() {
        assert!(matches!(Scenario::parse("[topology]\nlocal_nodes = 0"), Err(SimError::Config(_))));
        assert!(matches!(Scenario::parse("[topology]\nreplication_factor = 6"), Err(SimError::Config(_))));
        assert!(matches!(Scenario::parse("[topology]\nlocal_nodez = 3"), Err(SimError::Toml(_))));
        assert!(matches!(Scenario::parse("[workload]\nprofile = \"year9\""), Err(SimError::Config(_))));
        assert!(matches!(
            Scenario::parse("[[faults]]\nat_ms = 1\nkind = \"partition\"\ntarget = \"local-1\""),
            Err(SimError::Config(_))
        ));
        assert!(matches!(
            Scenario::parse("[[faults]]\nat_ms = 1\nkind = \"congest\"\ntarget = \"local->remote\""),
            Err(SimError::Config(_))
        ));
        assert!(matches!(
            Scenario::parse("[[faults]]\nat_ms = 1\nkind = \"node_crash\"\ntarget = \"local-9\""),
            Err(SimError::UnknownTarget(_))
        ));
        assert!(matches!(Scenario::parse("[policy]\nmin_on = 0"), Err(SimError::Policy(_))));
    }

    #[test]
    fn custom_profile_needs_a_rate() {
        let s = Scenario::parse("[workload]\nprofile = \"custom\"\nrequests_per_day = 5000").unwrap();
        assert_eq!(s.profile().requests_per_day, 5000.0);
    }
}
