//! Autoscaling of the local worker pool.
//!
//! Always-on workers (`min_on`) never stop. Above that, the pool follows
//! `ceil(rate / (capacity_per_worker * scale_up_threshold))`: scale-up is
//! immediate, scale-down removes one worker per cooldown.

use std::collections::VecDeque;
use std::fmt::Write as _;

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Width of the observed-rate window.
pub const RATE_WINDOW_SECS: u64 = 10;

#[derive(Debug, Error, PartialEq)]
pub enum PolicyError {
    #[error("min_on must be at least 1 and at most max_local ({min_on} / {max_local})")]
    WorkerBounds { min_on: u32, max_local: u32 },
    #[error("scale_up_threshold must be in (0, 1], got {0}")]
    Threshold(f64),
    #[error("capacity_per_worker must be positive, got {0}")]
    Capacity(f64),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ScalePolicy {
    pub min_on: u32,
    pub max_local: u32,
    /// Requests per second one worker sustains.
    pub capacity_per_worker: f64,
    pub scale_up_threshold: f64,
    /// Seconds between scale-down steps.
    pub cooldown: u64,
    /// Queued requests across local workers before reads overflow to remote.
    pub overflow_queue_cap: usize,
    /// Delay before a newly started worker takes requests.
    pub startup_delay_ms: u64,
}

impl Default for ScalePolicy {
    fn default() -> Self {
        ScalePolicy {
            min_on: 1,
            max_local: 20,
            capacity_per_worker: 100.0,
            scale_up_threshold: 0.8,
            cooldown: 60,
            overflow_queue_cap: 100,
            startup_delay_ms: 0,
        }
    }
}

impl ScalePolicy {
    pub fn validate(&self) -> Result<(), PolicyError> {
        if self.min_on < 1 || self.min_on > self.max_local {
            return Err(PolicyError::WorkerBounds { min_on: self.min_on, max_local: self.max_local });
        }
        if !(self.scale_up_threshold > 0.0 && self.scale_up_threshold <= 1.0) {
            return Err(PolicyError::Threshold(self.scale_up_threshold));
        }
        if !(self.capacity_per_worker > 0.0 && self.capacity_per_worker.is_finite()) {
            return Err(PolicyError::Capacity(self.capacity_per_worker));
        }
        Ok(())
    }

    pub fn cooldown_ms(&self) -> u64 {
        self.cooldown.saturating_mul(1000)
    }
}

pub fn desired_workers(observed_rate: f64, policy: &ScalePolicy) -> u32 {
    let per_worker = policy.capacity_per_worker * policy.scale_up_threshold;
    let raw = (observed_rate.max(0.0) / per_worker).ceil();
    let raw = if raw.is_finite() { raw.min(f64::from(u32::MAX)) as u32 } else { u32::MAX };
    raw.clamp(policy.min_on, policy.max_local)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "action", content = "n", rename_all = "snake_case")]
pub enum ScaleAction {
    None,
    Up(u32),
    Down(u32),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClusterState {
    pub active_workers: u32,
    /// Workers started but still inside their startup delay.
    pub booting_workers: u32,
    pub queue_depth: usize,
    pub observed_rate: f64,
    /// Milliseconds; `None` until the first scale-down.
    pub last_scale_down: Option<u64>,
}

impl ClusterState {
    pub fn new(policy: &ScalePolicy) -> Self {
        ClusterState {
            active_workers: policy.min_on,
            booting_workers: 0,
            queue_depth: 0,
            observed_rate: 0.0,
            last_scale_down: None,
        }
    }

    pub fn provisioned(&self) -> u32 {
        self.active_workers + self.booting_workers
    }
}

/// The scaling decision for `state` at `now` (ms). Pure.
pub fn tick(state: &ClusterState, policy: &ScalePolicy, now: u64) -> ScaleAction {
    let desired = desired_workers(state.observed_rate, policy);
    let have = state.provisioned();
    if desired > have {
        return ScaleAction::Up(desired - have);
    }
    let cooled = state.last_scale_down.is_none_or(|t| now.saturating_sub(t) >= policy.cooldown_ms());
    if desired < state.active_workers && state.active_workers > policy.min_on && cooled {
        return ScaleAction::Down(1);
    }
    ScaleAction::None
}

/// Arrival counts in one-second buckets; the rate at `now` averages the
/// last [`RATE_WINDOW_SECS`] complete seconds.
#[derive(Debug, Clone, Default)]
pub struct RateWindow {
    buckets: VecDeque<(u64, u64)>,
}

impl RateWindow {
    pub fn record(&mut self, at_ms: u64) {
        self.record_n(at_ms, 1);
    }

    pub fn record_n(&mut self, at_ms: u64, n: u64) {
        let sec = at_ms / 1000;
        match self.buckets.back_mut() {
            Some((s, c)) if *s == sec => *c += n,
            _ => self.buckets.push_back((sec, n)),
        }
    }

    pub fn rate(&mut self, now_ms: u64) -> f64 {
        let now_s = now_ms / 1000;
        let from = now_s.saturating_sub(RATE_WINDOW_SECS);
        while self.buckets.front().is_some_and(|(s, _)| *s < from) {
            self.buckets.pop_front();
        }
        let n: u64 = self.buckets.iter().filter(|(s, _)| *s >= from && *s < now_s).map(|(_, c)| c).sum();
        n as f64 / RATE_WINDOW_SECS as f64
    }
}

/// One controller sample, as written to the metrics CSV.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricsRow {
    pub t: u64,
    pub rate: f64,
    pub active_workers: u32,
    pub queue_depth: usize,
}

pub const METRICS_CSV_HEADER: &str = "t,rate,active_workers,queue_depth";

pub fn metrics_csv(rows: &[MetricsRow]) -> String {
    let mut out = String::with_capacity(32 * (rows.len() + 1));
    out.push_str(METRICS_CSV_HEADER);
    out.push('\n');
    for r in rows {
        let _ = writeln!(out, "{},{:.3},{},{}", r.t, r.rate, r.active_workers, r.queue_depth);
    }
    out
}

/// The controller actor: feed it arrivals, tick it on a clock.
#[derive(Debug, Clone)]
pub struct Autoscaler {
    policy: ScalePolicy,
    state: ClusterState,
    window: RateWindow,
}

impl Autoscaler {
    pub fn new(policy: ScalePolicy) -> Result<Self, PolicyError> {
        policy.validate()?;
        Ok(Autoscaler { state: ClusterState::new(&policy), policy, window: RateWindow::default() })
    }

    pub fn policy(&self) -> &ScalePolicy {
        &self.policy
    }

    pub fn state(&self) -> &ClusterState {
        &self.state
    }

    /// Replaces the policy, clamping the current pool into its bounds.
    pub fn set_policy(&mut self, policy: ScalePolicy) -> Result<(), PolicyError> {
        policy.validate()?;
        self.policy = policy;
        self.state.active_workers = self.state.active_workers.clamp(policy.min_on, policy.max_local);
        self.state.booting_workers =
            self.state.booting_workers.min(policy.max_local - self.state.active_workers);
        Ok(())
    }

    pub fn observe_arrival(&mut self, at_ms: u64) {
        self.window.record(at_ms);
    }

    pub fn set_queue_depth(&mut self, depth: usize) {
        self.state.queue_depth = depth;
    }

    /// Samples the rate, decides and applies an action. Workers added by
    /// `Up` are booting until [`Autoscaler::worker_ready`] when the policy
    /// has a startup delay, and active at once otherwise.
    pub fn tick(&mut self, now_ms: u64) -> ScaleAction {
        self.state.observed_rate = self.window.rate(now_ms);
        let action = tick(&self.state, &self.policy, now_ms);
        match action {
            ScaleAction::Up(n) if self.policy.startup_delay_ms == 0 => self.state.active_workers += n,
            ScaleAction::Up(n) => self.state.booting_workers += n,
            ScaleAction::Down(n) => {
                self.state.active_workers -= n;
                self.state.last_scale_down = Some(now_ms);
            }
            ScaleAction::None => {}
        }
        action
    }

    pub fn worker_ready(&mut self) {
        if self.state.booting_workers > 0 {
            self.state.booting_workers -= 1;
            self.state.active_workers += 1;
        }
    }

    pub fn sample(&self, now_ms: u64) -> MetricsRow {
        MetricsRow {
            t: now_ms,
            rate: self.state.observed_rate,
            active_workers: self.state.active_workers,
            queue_depth: self.state.queue_depth,
        }
    }
}

#[cfg(test)]
mod tests {
    use proptest::prelude::*;

    use super::*;

    fn policy(threshold: f64) -> ScalePolicy {
        ScalePolicy { scale_up_threshold: threshold, ..ScalePolicy::default() }
    }

    #[test]
    fn desired_examples() {
        let p = policy(1.0);
        assert_eq!(desired_workers(0.0, &p), 1);
        assert_eq!(desired_workers(250.0, &p), 3);
        assert_eq!(desired_workers(10_000.0, &p), 20);
        assert_eq!(desired_workers(f64::INFINITY, &p), 20);
        assert_eq!(desired_workers(80.0, &policy(0.8)), 1);
        assert_eq!(desired_workers(81.0, &policy(0.8)), 2);
    }

    #[test]
    fn policy_validation() {
        assert!(ScalePolicy::default().validate().is_ok());
        assert!(ScalePolicy { min_on: 0, ..ScalePolicy::default() }.validate().is_err());
        assert!(ScalePolicy { min_on: 5, max_local: 4, ..ScalePolicy::default() }.validate().is_err());
        assert!(policy(0.0).validate().is_err());
        assert!(policy(1.5).validate().is_err());
        assert!(ScalePolicy { capacity_per_worker: 0.0, ..ScalePolicy::default() }.validate().is_err());
    }

    #[test]
    fn up_is_immediate_down_waits() {
        let p = policy(1.0);
        let mut s = ClusterState::new(&p);
        s.observed_rate = 450.0;
        assert_eq!(tick(&s, &p, 0), ScaleAction::Up(4));
        s.active_workers = 5;
        s.observed_rate = 0.0;
        s.last_scale_down = Some(1_000);
        assert_eq!(tick(&s, &p, 30_000), ScaleAction::None);
        assert_eq!(tick(&s, &p, 61_000), ScaleAction::Down(1));
    }

    #[test]
    fn never_below_min_on() {
        let p = ScalePolicy { min_on: 2, ..policy(1.0) };
        let s = ClusterState::new(&p);
        assert_eq!(tick(&s, &p, 1_000_000), ScaleAction::None);
    }

    #[test]
    fn window_averages_complete_seconds() {
        let mut w = RateWindow::default();
        for ms in 0..5000 {
            if ms % 10 == 0 {
                w.record(ms);
            }
        }
        assert_eq!(w.rate(5000), 50.0);
        assert_eq!(w.rate(10_000), 50.0);
        assert_eq!(w.rate(15_000), 0.0);
    }

    #[test]
    fn step_load_trace() {
        let p = policy(1.0);
        let mut a = Autoscaler::new(p).unwrap();
        let mut trace = Vec::new();
        for sec in 0..300u64 {
            let rate = if (10..70).contains(&sec) { 250 } else { 0 };
            for i in 0..rate {
                a.observe_arrival(sec * 1000 + i * 1000 / rate);
            }
            a.tick((sec + 1) * 1000);
            trace.push(a.state().active_workers);
        }
        let mut changes = vec![trace[0]];
        for w in trace.windows(2) {
            if w[1] != w[0] {
                changes.push(w[1]);
            }
        }
        assert_eq!(changes, vec![1, 2, 3, 2, 1]);
        let first_down = trace.iter().rposition(|w| *w == 3).unwrap() + 1;
        let second_down = trace.iter().rposition(|w| *w == 2).unwrap() + 1;
        assert_eq!(second_down - first_down, 60);
    }

    #[test]
    fn startup_delay_books_workers() {
        let p = ScalePolicy { startup_delay_ms: 5_000, ..policy(1.0) };
        let mut a = Autoscaler::new(p).unwrap();
        for i in 0..3000 {
            a.observe_arrival(i * 10 / 3);
        }
        assert_eq!(a.tick(10_000), ScaleAction::Up(2));
        assert_eq!(a.tick(11_000), ScaleAction::None);
        a.worker_ready();
        a.worker_ready();
        assert_eq!(a.state().active_workers, 3);
    }

    #[test]
    fn metrics_csv_format() {
        let rows = [MetricsRow { t: 1000, rate: 2.5, active_workers: 1, queue_depth: 0 }];
        assert_eq!(metrics_csv(&rows), "t,rate,active_workers,queue_depth\n1000,2.500,1,0\n");
    }

    proptest! {
        #[test]
        fn desired_monotone_and_bounded(a in 0.0f64..1e6, b in 0.0f64..1e6, min_on in 1u32..5, extra in 0u32..30,
                                        thr in 0.01f64..=1.0, cap in 1.0f64..500.0) {
            let p = ScalePolicy { min_on, max_local: min_on + extra, scale_up_threshold: thr,
                                  capacity_per_worker: cap, ..ScalePolicy::default() };
            let (lo, hi) = if a <= b { (a, b) } else { (b, a) };
            prop_assert!(desired_workers(lo, &p) <= desired_workers(hi, &p));
            let d = desired_workers(a, &p);
            prop_assert!(d >= p.min_on && d <= p.max_local);
        }

        #[test]
        fn constant_rate_at_most_one_down_per_cooldown(rate in 0.0f64..2000.0, start in 1u32..20) {
            let p = policy(1.0);
            let mut s = ClusterState::new(&p);
            s.active_workers = start;
            s.observed_rate = rate;
            let mut downs = Vec::new();
            for sec in 0..600u64 {
                let now = sec * 1000;
                match tick(&s, &p, now) {
                    ScaleAction::Up(n) => s.active_workers += n,
                    ScaleAction::Down(n) => {
                        s.active_workers -= n;
                        s.last_scale_down = Some(now);
                        downs.push(now);
                    }
                    ScaleAction::None => {}
                }
                prop_assert!(s.active_workers >= p.min_on && s.active_workers <= p.max_local);
            }
            prop_assert!(downs.windows(2).all(|w| w[1] - w[0] >= p.cooldown_ms()));
        }
    }
}
