//! WebAssembly bindings for `www/index.html`.
//!
//! Each export takes plain numbers or strings and returns a JSON string;
//! the page renders it. The `*_json` functions hold the logic so they can
//! be tested natively.

use bdps_core::elasticity::{Autoscaler, ScalePolicy};
use bdps_core::nid::parse_nid;
use bdps_core::simharness::{run, FaultKind, FaultSpec, LogEvent, Outcome, RateStep, Scenario, Site};
use serde_json::json;
use wasm_bindgen::prelude::*;

pub fn nid_json(text: &str) -> Result<String, String> {
    let id = parse_nid(text.trim()).map_err(|e| e.to_string())?;
    Ok(json!({
        "canonical": id.canonical(),
        "district": id.district,
        "rmo": id.rmo,
        "thana": id.thana,
        "union": id.union_code,
        "serial": id.serial,
    })
    .to_string())
}

/// Drives the controller with a square pulse of `peak` req/s from 30 s to
/// 90 s and returns one sample per second for five minutes.
pub fn elasticity_json(peak: f64, capacity: f64, threshold: f64, cooldown_s: u64) -> Result<String, String> {
    let policy = ScalePolicy {
        capacity_per_worker: capacity,
        scale_up_threshold: threshold,
        cooldown: cooldown_s,
        ..ScalePolicy::default()
    };
    let mut scaler = Autoscaler::new(policy).map_err(|e| e.to_string())?;
    let per_sec = peak.max(0.0).round() as u64;
    let mut rows = Vec::new();
    for t in 0..300u64 {
        if (30..90).contains(&t) {
            for _ in 0..per_sec {
                scaler.observe_arrival(t * 1000);
            }
        }
        scaler.tick((t + 1) * 1000);
        let s = scaler.sample((t + 1) * 1000);
        rows.push(json!([s.t / 1000, s.rate, s.active_workers]));
    }
    Ok(json!({ "rows": rows }).to_string())
}

/// Crashes every local node at `crash_ms` under a steady `rate` req/s and
/// summarises the run.
pub fn failover_json(seed: u64, crash_ms: u64, rate: f64) -> Result<String, String> {
    let mut s = Scenario { name: "demo-failover".into(), ..Scenario::default() };
    s.workload.profile = "idle".into();
    s.workload.initial_population = 200;
    s.workload.steps = vec![RateStep { at_ms: 0, rate }];
    s.faults = vec![FaultSpec::new(crash_ms, FaultKind::NodeCrash, "local-*")];
    let horizon = crash_ms + 30_000;
    let r = run(&s, seed, horizon).map_err(|e| e.to_string())?;
    let promoted_at = r.events.iter().find_map(|e| match e.event {
        LogEvent::Promote { .. } => Some(e.at_us / 1000),
        _ => None,
    });
    let after = |site| {
        r.requests
            .iter()
            .filter(|q| q.arrived_us > crash_ms * 1000 && q.outcome.answered() && q.served_by == Some(site))
            .count()
    };
    let failed = r.requests.iter().filter(|q| !q.outcome.answered() && q.outcome != Outcome::InFlight).count();
    Ok(json!({
        "arrivals": r.arrivals,
        "availability": r.availability,
        "promoted_at_ms": promoted_at,
        "answered_local_after_crash": after(Site::Local),
        "answered_remote_after_crash": after(Site::Remote),
        "failed": failed,
        "lost_writes": r.lost_writes,
        "p99_ms": r.p99_ms,
    })
    .to_string())
}

#[wasm_bindgen]
pub fn nid(text: &str) -> Result<String, JsValue> {
    nid_json(text).map_err(|e| JsValue::from_str(&e))
}

#[wasm_bindgen]
pub fn elasticity(peak: f64, capacity: f64, threshold: f64, cooldown_s: u32) -> Result<String, JsValue> {
    elasticity_json(peak, capacity, threshold, u64::from(cooldown_s)).map_err(|e| JsValue::from_str(&e))
}

#[wasm_bindgen]
pub fn failover(seed: u32, crash_ms: u32, rate: f64) -> Result<String, JsValue> {
    failover_json(u64::from(seed), u64::from(crash_ms), rate).map_err(|e| JsValue::from_str(&e))
}
