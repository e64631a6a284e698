//! The simulated deployment: a gateway, a local site of storage nodes and
//! workers, a remote site holding the mirror, and the links between them.
//!
//! All the decisions are made by the production code: [`route`] and
//! [`FailureDetector`] at the gateway, [`Autoscaler`] for the worker pool,
//! [`StorageCluster`] quorums and [`Registry`] operations at the sites, and
//! [`Shipper`] / [`Mirror`] for log shipping, promotion and resync. This
//! module only moves messages between them on a logical clock
//! (microseconds).

use std::collections::{BTreeMap, VecDeque};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Exp};

use super::engine::EventQueue;
use super::report::{LogEvent, LogRecord, MetricsReport, Outcome, RequestRecord};
use super::scenario::{FaultKind, FaultSpec, Link, Scenario, Site, Target};
use super::workload::{gen_arrivals, Arrival, Op};
use super::SimError;
use crate::elasticity::{Autoscaler, MetricsRow, ScaleAction};
use crate::gateway::auth::{Credential, CredentialStore, Principal};
use crate::gateway::billing::{FeeSchedule, UsageLedger};
use crate::gateway::routing::{route, FailureDetector, Health, LocalLoad, RouteTarget, Transition};
use crate::nid::NationalId;
use crate::registry::{citizen_key, Registry, RegistryError};
use crate::replication::{Batch, Mirror, PromoteReason, ReplicationMode, Role, Shipper};
use crate::storage::{NodeId, StorageCluster};
use crate::synth::{nid_for, synthetic_citizen};

type ReqId = u64;

#[derive(Debug, Clone)]
struct Job {
    req: ReqId,
    op: Op,
    nid: NationalId,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Reply {
    Ok,
    DomainError,
    Unavailable,
}

#[derive(Debug)]
enum Ev {
    Arrival(usize),
    LocalDeliver { worker: u32, job: Job },
    LocalDone { worker: u32, generation: u64, job: Job },
    RemoteDeliver { job: Job },
    RemoteDone { worker: u32, generation: u64, job: Job },
    Reply { req: ReqId, from: Site, reply: Reply },
    RequestTimeout(ReqId),
    ProbeTick,
    ProbeArrive { id: u64, site: Site },
    ProbeReply { id: u64 },
    ProbeDeadline { id: u64 },
    ShipTick,
    BatchArrive(Batch),
    AckArrive { acked: u64, epoch: u32 },
    AckDeadline { upto: u64, epoch: u32 },
    ScaleTick,
    WorkerReady,
    Fault { spec: FaultSpec, target: Target, undo: bool },
}

#[derive(Debug, Default)]
struct Worker {
    queue: VecDeque<Job>,
    busy: bool,
    generation: u64,
}

impl Worker {
    fn reset(&mut self) {
        self.queue.clear();
        self.busy = false;
        self.generation += 1;
    }

    fn load(&self) -> usize {
        self.queue.len() + usize::from(self.busy)
    }
}

#[derive(Debug, Clone, Copy, Default)]
struct LinkState {
    partitioned: bool,
    added_us: u64,
}

struct Pending {
    worker: Option<u32>,
}

/// One run of a scenario. Build it, optionally [`inject`](Self::inject)
/// more faults, then [`run`](Self::run).
pub struct Simulation {
    scenario: Scenario,
    seed: u64,
    horizon_us: u64,
    now: u64,
    queue: EventQueue<Ev>,
    rng: ChaCha8Rng,
    service: Exp<f64>,
    arrivals: Vec<Arrival>,

    local_up: Vec<bool>,
    remote_up: Vec<bool>,
    storage: StorageCluster,
    local: Registry,
    mirror: Mirror,
    shipper: Shipper,
    ship_armed: bool,
    local_generation: u64,
    workers: Vec<Worker>,
    remote_workers: Vec<Worker>,
    autoscaler: Autoscaler,
    held: Vec<(u64, ReqId)>,
    links: BTreeMap<Link, LinkState>,

    local_detector: FailureDetector,
    remote_detector: FailureDetector,
    probes: BTreeMap<u64, Site>,
    next_probe: u64,
    booked: Vec<usize>,
    pending: BTreeMap<ReqId, Pending>,
    requests: Vec<RequestRecord>,
    known: Vec<NationalId>,
    next_serial: u64,
    ledger: UsageLedger,
    corporate: Principal,
    operator: Principal,
    no_extra: CredentialStore,

    events: Vec<LogRecord>,
    rows: Vec<MetricsRow>,
}

fn secret_for(nid: &NationalId) -> String {
    format!("pw-{}", nid.canonical())
}

fn ms_to_us(ms: f64) -> u64 {
    (ms * 1000.0).round() as u64
}

impl Simulation {
    pub fn new(scenario: &Scenario, seed: u64, horizon_ms: u64) -> Result<Self, SimError> {
        let mut scenario = scenario.clone();
        scenario.seed = seed;
        scenario.horizon_ms = horizon_ms;
        scenario.validate()?;
        let topo = &scenario.topology;
        let policy = scenario.policy;

        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        // arrivals use stream 0 of the same seed
        rng.set_stream(1);
        let arrivals = gen_arrivals(&scenario.profile(), horizon_ms);

        let mut storage = StorageCluster::new(topo.local_nodes, topo.replication_factor);
        let mut local = Registry::in_memory();
        let mut known = Vec::with_capacity(scenario.workload.initial_population as usize);
        for n in 0..scenario.workload.initial_population {
            let nid = nid_for(n);
            let record = synthetic_citizen(&mut rng, nid);
            let cred = Credential::new(Principal::Citizen(nid), &secret_for(&nid), &mut rng);
            local.insert_citizen_with(record, Some(cred))?;
            storage.write(&citizen_key(&nid), &local.last_seq().to_string()).expect("all nodes up");
            known.push(nid);
        }
        let mirror = Mirror::new(Registry::from_log(local.log().clone())?);
        let shipper = Shipper::caught_up(local.last_seq(), mirror.epoch());

        let mut links = BTreeMap::new();
        for a in [Site::Gateway, Site::Local, Site::Remote] {
            for b in [Site::Gateway, Site::Local, Site::Remote] {
                if a != b {
                    links.insert((a, b), LinkState::default());
                }
            }
        }

        let mut sim = Simulation {
            seed,
            horizon_us: horizon_ms * 1000,
            now: 0,
            queue: EventQueue::default(),
            rng,
            service: Exp::new(policy.capacity_per_worker / 1e6).expect("validated capacity"),
            arrivals,
            local_up: vec![true; topo.local_nodes as usize],
            remote_up: vec![true; topo.remote_nodes as usize],
            storage,
            local,
            mirror,
            shipper,
            ship_armed: false,
            local_generation: 0,
            workers: (0..policy.max_local).map(|_| Worker::default()).collect(),
            remote_workers: (0..topo.remote_nodes).map(|_| Worker::default()).collect(),
            autoscaler: Autoscaler::new(policy)?,
            held: Vec::new(),
            links,
            local_detector: FailureDetector::new(scenario.detector.config()),
            remote_detector: FailureDetector::new(scenario.detector.config()),
            probes: BTreeMap::new(),
            next_probe: 0,
            booked: vec![0; policy.max_local as usize],
            pending: BTreeMap::new(),
            requests: Vec::new(),
            known,
            next_serial: scenario.workload.initial_population,
            ledger: UsageLedger::new(FeeSchedule::default()),
            corporate: Principal::Corporate("sim-corporate".into()),
            operator: Principal::DataEntryAuthority("sim-operator".into()),
            no_extra: CredentialStore::default(),
            events: Vec::new(),
            rows: Vec::new(),
            scenario,
        };
        // faults go in first so they precede periodic events at the same instant
        for f in sim.scenario.faults.clone() {
            sim.inject(f)?;
        }
        sim.queue.push(0, Ev::ProbeTick);
        sim.queue.push(1_000_000, Ev::ScaleTick);
        if !sim.arrivals.is_empty() {
            sim.queue.push(sim.arrivals[0].at_us, Ev::Arrival(0));
        }
        Ok(sim)
    }

    /// Schedules a fault (and its undo when it has a duration).
    pub fn inject(&mut self, fault: FaultSpec) -> Result<(), SimError> {
        let target = fault.resolve(&self.scenario.topology)?;
        if let Some(d) = fault.duration_ms {
            let at = (fault.at_ms + d) * 1000;
            self.queue.push(at, Ev::Fault { spec: fault.clone(), target: target.clone(), undo: true });
        }
        self.queue.push(fault.at_ms * 1000, Ev::Fault { spec: fault, target, undo: false });
        Ok(())
    }

    pub fn run(mut self) -> MetricsReport {
        while let Some(at) = self.queue.peek_time() {
            if at > self.horizon_us {
                break;
            }
            let (at, ev) = self.queue.pop().expect("peeked");
            debug_assert!(at >= self.now);
            self.now = at;
            self.handle(ev);
        }
        self.now = self.horizon_us;
        let mut report = MetricsReport {
            scenario: self.scenario.name.clone(),
            seed: self.seed,
            horizon_ms: self.scenario.horizon_ms,
            arrivals: 0,
            served_local: 0,
            served_remote: 0,
            unavailable: 0,
            timed_out: 0,
            rejected: 0,
            in_flight: 0,
            availability: 1.0,
            p50_ms: 0.0,
            p99_ms: 0.0,
            lost_writes: 0,
            promotions: 0,
            resyncs: 0,
            billed_units: self.ledger.entries().iter().map(|e| e.fee_units).sum(),
            local_last_seq: self.local.last_seq(),
            remote_applied_seq: self.mirror.applied_seq(),
            local_state_hash: self.local.state_hash(),
            remote_state_hash: self.mirror.registry().state_hash(),
            worker_trace: self.rows,
            requests: self.requests,
            events: self.events,
        };
        report.tally();
        report
    }

    fn log(&mut self, event: LogEvent) {
        self.events.push(LogRecord { at_us: self.now, event });
    }

    fn latency_us(&self, link: Link) -> u64 {
        let base = if link.0 == Site::Remote || link.1 == Site::Remote {
            self.scenario.topology.wan_latency_ms
        } else {
            self.scenario.topology.lan_latency_ms
        };
        ms_to_us(base) + self.links[&link].added_us
    }

    /// Puts `ev` on `link`; partitioned links drop it.
    fn send(&mut self, link: Link, ev: Ev) {
        if self.links[&link].partitioned {
            return;
        }
        let at = self.now + self.latency_us(link);
        self.queue.push(at, ev);
    }

    fn local_site_up(&self) -> bool {
        self.local_up.iter().any(|u| *u)
    }

    fn remote_site_up(&self) -> bool {
        self.remote_up.iter().any(|u| *u)
    }

    fn site_up(&self, site: Site) -> bool {
        match site {
            Site::Local => self.local_site_up(),
            Site::Remote => self.remote_site_up(),
            Site::Gateway => true,
        }
    }

    /// Local health as the router sees it: a promoted mirror means the
    /// local side is out until resynced.
    fn local_health(&self) -> Health {
        if self.mirror.role() == Role::RemotePromoted {
            Health::Down
        } else {
            self.local_detector.health()
        }
    }

    fn handle(&mut self, ev: Ev) {
        match ev {
            Ev::Arrival(i) => self.on_arrival(i),
            Ev::LocalDeliver { worker, job } => {
                if self.local_site_up() {
                    self.workers[worker as usize].queue.push_back(job);
                    self.start_local(worker);
                }
            }
            Ev::LocalDone { worker, generation, job } => self.on_local_done(worker, generation, job),
            Ev::RemoteDeliver { job } => self.on_remote_deliver(job),
            Ev::RemoteDone { worker, generation, job } => self.on_remote_done(worker, generation, job),
            Ev::Reply { req, from, reply } => self.on_reply(req, from, reply),
            Ev::RequestTimeout(req) => {
                if let Some(p) = self.pending.remove(&req) {
                    self.unbook(&p);
                    self.finish(req, Outcome::Timeout, None);
                }
            }
            Ev::ProbeTick => self.on_probe_tick(),
            Ev::ProbeArrive { id, site } => {
                if self.site_up(site) {
                    self.send((site, Site::Gateway), Ev::ProbeReply { id });
                }
            }
            Ev::ProbeReply { id } => {
                if let Some(site) = self.probes.remove(&id) {
                    let t = self.detector(site).record_success();
                    self.on_transition(site, t);
                }
            }
            Ev::ProbeDeadline { id } => {
                if let Some(site) = self.probes.remove(&id) {
                    let t = self.detector(site).record_timeout();
                    self.on_transition(site, t);
                }
            }
            Ev::ShipTick => self.on_ship_tick(),
            Ev::BatchArrive(batch) => self.on_batch(batch),
            Ev::AckArrive { acked, epoch } => self.on_ack(acked, epoch),
            Ev::AckDeadline { upto, epoch } => {
                if epoch == self.shipper.epoch()
                    && self.shipper.acked_seq() < upto
                    && self.local_site_up()
                    && self.mirror.role() == Role::LocalPrimary
                {
                    self.shipper.rewind();
                    self.log(LogEvent::Rewind { to: self.shipper.cursor() });
                    self.arm_ship();
                }
            }
            Ev::ScaleTick => self.on_scale_tick(),
            Ev::WorkerReady => self.autoscaler.worker_ready(),
            Ev::Fault { spec, target, undo } => self.on_fault(spec, target, undo),
        }
    }

    fn detector(&mut self, site: Site) -> &mut FailureDetector {
        match site {
            Site::Remote => &mut self.remote_detector,
            _ => &mut self.local_detector,
        }
    }

    // gateway

    fn on_arrival(&mut self, i: usize) {
        let a = self.arrivals[i];
        if let Some(next) = self.arrivals.get(i + 1) {
            self.queue.push(next.at_us, Ev::Arrival(i + 1));
        }
        let nid = match a.op {
            Op::Insert => {
                self.next_serial += 1;
                nid_for(self.next_serial - 1)
            }
            _ if self.known.is_empty() => nid_for(0),
            _ => self.known[self.rng.random_range(0..self.known.len())],
        };
        self.autoscaler.observe_arrival(self.now / 1000);
        let active = self.autoscaler.state().active_workers as usize;
        let queues: Vec<(u32, usize)> = (0..active).map(|w| (w as u32, self.booked[w])).collect();
        let load = LocalLoad { worker_queues: &queues, queue_cap: self.scenario.policy.overflow_queue_cap };
        let decision = route(a.op.is_write(), load, self.local_health(), self.remote_detector.health());
        let req = self.requests.len() as ReqId;
        self.requests.push(RequestRecord {
            id: req,
            op: a.op,
            arrived_us: self.now,
            finished_us: None,
            route: decision.reason,
            served_by: None,
            possibly_stale: false,
            outcome: Outcome::InFlight,
        });
        let job = Job { req, op: a.op, nid };
        match decision.target {
            RouteTarget::Rejected => self.finish(req, Outcome::Rejected, None),
            RouteTarget::LocalWorker(w) => {
                self.booked[w as usize] += 1;
                self.pending.insert(req, Pending { worker: Some(w) });
                self.send((Site::Gateway, Site::Local), Ev::LocalDeliver { worker: w, job });
                self.arm_timeout(req);
            }
            RouteTarget::Remote => {
                self.pending.insert(req, Pending { worker: None });
                self.send((Site::Gateway, Site::Remote), Ev::RemoteDeliver { job });
                self.arm_timeout(req);
            }
        }
    }

    fn arm_timeout(&mut self, req: ReqId) {
        let at = self.now + self.scenario.gateway.request_timeout_ms * 1000;
        self.queue.push(at, Ev::RequestTimeout(req));
    }

    fn unbook(&mut self, p: &Pending) {
        if let Some(w) = p.worker {
            self.booked[w as usize] -= 1;
        }
    }

    fn finish(&mut self, req: ReqId, outcome: Outcome, from: Option<Site>) {
        let r = &mut self.requests[req as usize];
        r.finished_us = Some(self.now);
        r.outcome = outcome;
        r.served_by = from;
    }

    fn on_reply(&mut self, req: ReqId, from: Site, reply: Reply) {
        let Some(p) = self.pending.remove(&req) else {
            return; // already timed out
        };
        self.unbook(&p);
        let outcome = match reply {
            Reply::Ok => Outcome::Ok,
            Reply::DomainError => Outcome::DomainError,
            Reply::Unavailable => Outcome::Unavailable,
        };
        let r = &self.requests[req as usize];
        if outcome == Outcome::Ok && r.op == Op::Verify {
            self.ledger.record_usage(&self.corporate, "verify", 1, self.now / 1000).expect("in-memory ledger");
        }
        self.finish(req, outcome, Some(from));
    }

    fn on_probe_tick(&mut self) {
        for site in [Site::Local, Site::Remote] {
            let id = self.next_probe;
            self.next_probe += 1;
            self.probes.insert(id, site);
            self.send((Site::Gateway, site), Ev::ProbeArrive { id, site });
            self.queue.push(self.now + self.scenario.detector.timeout_ms * 1000, Ev::ProbeDeadline { id });
        }
        let next = self.now + self.scenario.detector.probe_interval_ms * 1000;
        if next <= self.horizon_us {
            self.queue.push(next, Ev::ProbeTick);
        }
    }

    fn on_transition(&mut self, site: Site, t: Option<Transition>) {
        let Some(t) = t else { return };
        self.log(LogEvent::Detector { site, down: t == Transition::WentDown });
        match (site, t) {
            (Site::Local, Transition::WentDown)
                if self.scenario.gateway.auto_promote
                    && self.mirror.role() == Role::LocalPrimary
                    && self.remote_detector.health() == Health::Up =>
            {
                // the local log is durable; reading it here only names the
                // entries the promotion strands
                let report = self.mirror.promote(PromoteReason::LocalFailure, self.local.log()).expect("not promoted yet");
                self.log(LogEvent::Promote { epoch: report.epoch, fork_seq: report.fork_seq, lost_seqs: report.lost_seqs });
            }
            (Site::Local, Transition::CameUp)
                if self.scenario.gateway.auto_resync && self.mirror.role() == Role::RemotePromoted =>
            {
                self.resync();
            }
            _ => {}
        }
    }

    fn resync(&mut self) {
        match self.mirror.resync_local(&mut self.local) {
            Ok((report, shipper)) => {
                self.shipper = shipper;
                self.log(LogEvent::Resync {
                    epoch: report.epoch,
                    discarded: report.discarded,
                    replayed: report.replayed,
                    state_hash: format!("{:016x}", report.state_hash),
                });
            }
            Err(e) => self.log(LogEvent::ResyncFailed { reason: e.to_string() }),
        }
    }

    // local site

    fn start_local(&mut self, w: u32) {
        let worker = &mut self.workers[w as usize];
        if worker.busy {
            return;
        }
        let Some(job) = worker.queue.pop_front() else { return };
        worker.busy = true;
        let generation = self.local_generation;
        let dt = self.service.sample(&mut self.rng).ceil() as u64;
        self.queue.push(self.now + dt, Ev::LocalDone { worker: w, generation, job });
    }

    fn on_local_done(&mut self, w: u32, generation: u64, job: Job) {
        if generation != self.local_generation {
            return; // the site went down while this was in service
        }
        self.workers[w as usize].busy = false;
        let (reply, seq) = self.execute_local(&job);
        match seq {
            Some(seq) if self.scenario.replication.mode == ReplicationMode::SemiSync => {
                self.held.push((seq, job.req));
            }
            _ => self.send((Site::Local, Site::Gateway), Ev::Reply { req: job.req, from: Site::Local, reply }),
        }
        self.start_local(w);
    }

    fn execute_local(&mut self, job: &Job) -> (Reply, Option<u64>) {
        let key = citizen_key(&job.nid);
        if job.op.is_write() {
            // a fenced old primary takes no writes
            if self.mirror.role() == Role::RemotePromoted || !self.storage.can_write(&key) {
                return (Reply::Unavailable, None);
            }
        } else if !self.storage.can_read(&key) {
            return (Reply::Unavailable, None);
        }
        if !job.op.is_write() {
            return (read_op(&self.local, job, &self.no_extra, &mut self.rng), None);
        }
        match write_op(&mut self.local, job, &self.operator, &mut self.rng) {
            Ok(seq) => {
                self.storage.write(&key, &seq.to_string()).expect("quorum checked");
                if job.op == Op::Insert {
                    self.known.push(job.nid);
                }
                self.log(LogEvent::Commit { site: Site::Local, seq, epoch: self.shipper.epoch() });
                self.arm_ship();
                (Reply::Ok, Some(seq))
            }
            Err(_) => (Reply::DomainError, None),
        }
    }

    fn arm_ship(&mut self) {
        if !self.ship_armed {
            self.ship_armed = true;
            self.queue.push(self.now + self.scenario.replication.ship_interval_ms * 1000, Ev::ShipTick);
        }
    }

    fn on_ship_tick(&mut self) {
        self.ship_armed = false;
        if !self.local_site_up() || self.mirror.role() != Role::LocalPrimary {
            return;
        }
        let batch = self.shipper.next_batch(self.local.log(), self.scenario.replication.max_batch);
        if let (Some(first), Some(last)) = (batch.first_seq(), batch.last_seq()) {
            let epoch = batch.epoch;
            self.log(LogEvent::Ship { first, last, epoch });
            self.send((Site::Local, Site::Remote), Ev::BatchArrive(batch));
            self.queue.push(
                self.now + self.scenario.replication.ack_timeout_ms * 1000,
                Ev::AckDeadline { upto: last, epoch },
            );
        }
        if self.shipper.pending(self.local.log()) > 0 {
            self.arm_ship();
        }
    }

    fn on_ack(&mut self, acked: u64, epoch: u32) {
        if !self.local_site_up() || epoch != self.shipper.epoch() {
            return;
        }
        self.shipper.on_ack(acked);
        self.log(LogEvent::AckReceived { acked });
        let acked = self.shipper.acked_seq();
        let (release, keep): (Vec<_>, Vec<_>) = self.held.drain(..).partition(|(seq, _)| *seq <= acked);
        self.held = keep;
        for (_, req) in release {
            self.send((Site::Local, Site::Gateway), Ev::Reply { req, from: Site::Local, reply: Reply::Ok });
        }
    }

    // remote site

    fn on_remote_deliver(&mut self, job: Job) {
        let pick = (0..self.remote_workers.len())
            .filter(|i| self.remote_up[*i])
            .min_by_key(|i| (self.remote_workers[*i].load(), *i));
        if let Some(w) = pick {
            self.remote_workers[w].queue.push_back(job);
            self.start_remote(w as u32);
        }
    }

    fn start_remote(&mut self, w: u32) {
        let worker = &mut self.remote_workers[w as usize];
        if worker.busy {
            return;
        }
        let Some(job) = worker.queue.pop_front() else { return };
        worker.busy = true;
        let generation = worker.generation;
        let dt = self.service.sample(&mut self.rng).ceil() as u64;
        self.queue.push(self.now + dt, Ev::RemoteDone { worker: w, generation, job });
    }

    fn on_remote_done(&mut self, w: u32, generation: u64, job: Job) {
        if generation != self.remote_workers[w as usize].generation {
            return;
        }
        self.remote_workers[w as usize].busy = false;
        let promoted = self.mirror.role() == Role::RemotePromoted;
        let reply = if !job.op.is_write() {
            if !promoted {
                self.requests[job.req as usize].possibly_stale = true;
            }
            read_op(self.mirror.registry(), &job, &self.no_extra, &mut self.rng)
        } else {
            match self.mirror.primary_mut() {
                Err(_) => Reply::Unavailable,
                Ok(reg) => match write_op(reg, &job, &self.operator, &mut self.rng) {
                    Ok(seq) => {
                        if job.op == Op::Insert {
                            self.known.push(job.nid);
                        }
                        let epoch = self.mirror.epoch();
                        self.log(LogEvent::Commit { site: Site::Remote, seq, epoch });
                        Reply::Ok
                    }
                    Err(_) => Reply::DomainError,
                },
            }
        };
        self.send((Site::Remote, Site::Gateway), Ev::Reply { req: job.req, from: Site::Remote, reply });
        self.start_remote(w);
    }

    fn on_batch(&mut self, batch: Batch) {
        if !self.remote_site_up() {
            return;
        }
        match self.mirror.apply_batch(&batch) {
            Ok(applied) => {
                self.log(LogEvent::Applied { applied, epoch: batch.epoch });
                self.send((Site::Remote, Site::Local), Ev::AckArrive { acked: applied, epoch: batch.epoch });
            }
            Err(e) => self.log(LogEvent::BatchRejected { reason: e.to_string() }),
        }
    }

    // controller

    fn on_scale_tick(&mut self) {
        let now_ms = self.now / 1000;
        let depth: usize = self.booked.iter().sum();
        self.autoscaler.set_queue_depth(depth);
        let action = self.autoscaler.tick(now_ms);
        let delay = self.scenario.policy.startup_delay_ms;
        match action {
            ScaleAction::Up(n) => {
                if delay > 0 {
                    for _ in 0..n {
                        self.queue.push(self.now + delay * 1000, Ev::WorkerReady);
                    }
                }
                let active = self.autoscaler.state().active_workers;
                self.log(LogEvent::Scale { up: true, workers: n, active });
            }
            ScaleAction::Down(n) => {
                let active = self.autoscaler.state().active_workers;
                self.log(LogEvent::Scale { up: false, workers: n, active });
            }
            ScaleAction::None => {}
        }
        self.rows.push(self.autoscaler.sample(now_ms));
        let next = self.now + 1_000_000;
        if next <= self.horizon_us {
            self.queue.push(next, Ev::ScaleTick);
        }
    }

    // faults

    fn on_fault(&mut self, spec: FaultSpec, target: Target, undo: bool) {
        self.log(LogEvent::Fault { kind: spec.kind, target: spec.target.clone(), undo });
        let kind = match (spec.kind, undo) {
            (FaultKind::NodeCrash, true) => FaultKind::NodeRepair,
            (FaultKind::NodeRepair, true) => FaultKind::NodeCrash,
            (FaultKind::Partition, true) => FaultKind::Heal,
            (FaultKind::Heal, true) => FaultKind::Partition,
            (k, _) => k,
        };
        match target {
            Target::Nodes(site, nodes) => {
                let up = kind == FaultKind::NodeRepair;
                for n in nodes {
                    self.set_node(site, n, up);
                }
            }
            Target::Links(links) => {
                for link in links {
                    let added = if undo { 0 } else { spec.added_latency_ms.map_or(0, ms_to_us) };
                    let state = self.links.get_mut(&link).expect("resolved link");
                    match kind {
                        FaultKind::Partition => state.partitioned = true,
                        FaultKind::Heal => state.partitioned = false,
                        FaultKind::Congest => state.added_us = added,
                        _ => unreachable!("node faults are resolved to nodes"),
                    }
                }
            }
        }
    }

    fn set_node(&mut self, site: Site, n: u32, up: bool) {
        match site {
            Site::Local => {
                let was_up = self.local_site_up();
                self.local_up[n as usize] = up;
                let node = NodeId(n);
                let _ = if up { self.storage.repair(node) } else { self.storage.crash(node) };
                if was_up && !self.local_site_up() {
                    // everything in memory on the site is gone; the log is on disk
                    self.local_generation += 1;
                    for w in &mut self.workers {
                        w.reset();
                    }
                    self.held.clear();
                }
                if !was_up && self.local_site_up() && self.shipper.pending(self.local.log()) > 0 {
                    self.arm_ship();
                }
            }
            Site::Remote => {
                self.remote_up[n as usize] = up;
                if !up {
                    self.remote_workers[n as usize].reset();
                }
            }
            Site::Gateway => {}
        }
    }
}

fn read_op(reg: &Registry, job: &Job, extra: &CredentialStore, rng: &mut ChaCha8Rng) -> Reply {
    let nid = job.nid.canonical();
    let result = match job.op {
        Op::Verify => {
            let gender = ["Male", "Female", "Third"][rng.random_range(0..3)];
            let claims = BTreeMap::from([("Gender".to_string(), gender.to_string())]);
            reg.verify_fields(&nid, &claims).map(drop)
        }
        _ => reg.owner_lookup(&nid, &secret_for(&job.nid), extra).map(drop),
    };
    if result.is_ok() {
        Reply::Ok
    } else {
        Reply::DomainError
    }
}

fn write_op(reg: &mut Registry, job: &Job, operator: &Principal, rng: &mut ChaCha8Rng) -> Result<u64, RegistryError> {
    match job.op {
        Op::Insert => {
            let record = synthetic_citizen(rng, job.nid);
            let cred = Credential::new(Principal::Citizen(job.nid), &secret_for(&job.nid), rng);
            reg.insert_citizen_with(record, Some(cred))?;
        }
        _ => {
            let phone = format!("01{:09}", rng.random_range(0..1_000_000_000u32));
            let changes = BTreeMap::from([("Phone".to_string(), phone)]);
            reg.update_citizen(&job.nid.canonical(), &changes, operator)?;
        }
    }
    Ok(reg.last_seq())
}

/// Convenience: build and run.
pub fn run(scenario: &Scenario, seed: u64, horizon_ms: u64) -> Result<MetricsReport, SimError> {
    Ok(Simulation::new(scenario, seed, horizon_ms)?.run())
}
