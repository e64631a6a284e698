//! Request workloads: a daily request volume scaled down for desk replay,
//! or an explicit piecewise-constant rate schedule.

use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rand::SeedableRng;
use rand_distr::{Distribution, Exp};
use serde::{Deserialize, Serialize};

use super::SimError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Op {
    Verify,
    OwnerLookup,
    Insert,
    Update,
}

impl Op {
    pub fn is_write(self) -> bool {
        matches!(self, Op::Insert | Op::Update)
    }

    pub fn name(self) -> &'static str {
        match self {
            Op::Verify => "verify",
            Op::OwnerLookup => "owner_lookup",
            Op::Insert => "insert",
            Op::Update => "update",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Mix {
    pub verify: f64,
    pub owner_lookup: f64,
    pub insert: f64,
    pub update: f64,
}

impl Default for Mix {
    fn default() -> Self {
        Mix { verify: 0.80, owner_lookup: 0.10, insert: 0.05, update: 0.05 }
    }
}

impl Mix {
    fn weights(&self) -> [(Op, f64); 4] {
        [(Op::Verify, self.verify), (Op::OwnerLookup, self.owner_lookup), (Op::Insert, self.insert), (Op::Update, self.update)]
    }

    pub fn validate(&self) -> Result<(), SimError> {
        if self.weights().iter().any(|(_, w)| !(w.is_finite() && *w >= 0.0)) {
            return Err(SimError::Config("workload.mix: fractions must be non-negative".into()));
        }
        let sum: f64 = self.weights().iter().map(|(_, w)| w).sum();
        if (sum - 1.0).abs() > 1e-9 {
            return Err(SimError::Config(format!("workload.mix: fractions sum to {sum}, expected 1")));
        }
        Ok(())
    }

    fn pick(&self, u: f64) -> Op {
        let mut acc = 0.0;
        for (op, w) in self.weights() {
            acc += w;
            if u < acc {
                return op;
            }
        }
        // rounding can leave u just above the last boundary
        self.weights().iter().rev().find(|(_, w)| *w > 0.0).map_or(Op::Verify, |(op, _)| *op)
    }
}

/// A segment of an explicit schedule: `rate` requests per second from
/// `at_ms` until the next step.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RateStep {
    pub at_ms: u64,
    pub rate: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WorkloadProfile {
    pub name: String,
    pub requests_per_day: f64,
    pub mix: Mix,
    pub scale_factor: f64,
    pub seed: u64,
    /// Replaces the constant daily rate when non-empty.
    pub steps: Vec<RateStep>,
}

pub const DAY_MS: u64 = 86_400_000;

impl WorkloadProfile {
    /// Named yearly projections: 100k, 500k and 1M requests per day.
    pub fn named(name: &str) -> Option<Self> {
        let per_day = match name {
            "year1" => 100_000.0,
            "year3" => 500_000.0,
            "year5" => 1_000_000.0,
            "idle" => 0.0,
            _ => return None,
        };
        Some(WorkloadProfile {
            name: name.to_string(),
            requests_per_day: per_day,
            mix: Mix::default(),
            scale_factor: 1000.0,
            seed: 0,
            steps: Vec::new(),
        })
    }

    /// Arrivals per second after scaling.
    pub fn rate_per_sec(&self) -> f64 {
        self.requests_per_day / (86_400.0 * self.scale_factor)
    }

    pub fn validate(&self) -> Result<(), SimError> {
        self.mix.validate()?;
        if !(self.scale_factor > 0.0 && self.scale_factor.is_finite()) {
            return Err(SimError::Config("workload.scale_factor must be positive".into()));
        }
        if !(self.requests_per_day >= 0.0 && self.requests_per_day.is_finite()) {
            return Err(SimError::Config("workload.requests_per_day must be non-negative".into()));
        }
        if self.steps.iter().any(|s| !(s.rate >= 0.0 && s.rate.is_finite())) {
            return Err(SimError::Config("workload.steps: rates must be non-negative".into()));
        }
        if self.steps.windows(2).any(|w| w[1].at_ms <= w[0].at_ms) {
            return Err(SimError::Config("workload.steps: at_ms must increase".into()));
        }
        Ok(())
    }

    /// `(start_ms, end_ms, rate per second)` segments covering the horizon.
    fn segments(&self, horizon_ms: u64) -> Vec<(u64, u64, f64)> {
        if self.steps.is_empty() {
            return vec![(0, horizon_ms, self.rate_per_sec())];
        }
        let mut out = Vec::new();
        for (i, s) in self.steps.iter().enumerate() {
            let end = self.steps.get(i + 1).map_or(horizon_ms, |n| n.at_ms).min(horizon_ms);
            if s.at_ms < end {
                out.push((s.at_ms, end, s.rate));
            }
        }
        out
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Arrival {
    /// Microseconds of logical time.
    pub at_us: u64,
    pub op: Op,
}

/// Seeded Poisson arrivals over `[0, horizon_ms)`, time ordered.
pub fn gen_arrivals(profile: &WorkloadProfile, horizon_ms: u64) -> Vec<Arrival> {
    let mut rng = ChaCha8Rng::seed_from_u64(profile.seed);
    let mut out = Vec::new();
    for (start, end, rate) in profile.segments(horizon_ms) {
        if rate <= 0.0 {
            continue;
        }
        let gap = Exp::new(rate / 1e6).expect("positive rate");
        let mut t = (start * 1000) as f64;
        let end_us = (end * 1000) as f64;
        loop {
            t += gap.sample(&mut rng);
            if t >= end_us {
                break;
            }
            let op = profile.mix.pick(rng.random::<f64>());
            out.push(Arrival { at_us: t as u64, op });
        }
    }
    out
}
