//! Deterministic discrete-event simulation of the whole deployment, with
//! fault injection and scaled-down daily workloads.
//!
//! A run is a pure function of the scenario and the seed: one event loop,
//! one seeded RNG, no wall-clock reads.

mod engine;
pub mod report;
pub mod scenario;
mod sim;
pub mod workload;

use thiserror::Error;

use crate::elasticity::PolicyError;
use crate::registry::RegistryError;

pub use engine::EventQueue;
pub use report::{LogEvent, LogRecord, MetricsReport, Outcome, RequestRecord};
pub use scenario::{FaultKind, FaultSpec, Scenario, Site, Target, Topology};
pub use sim::{run, Simulation};
pub use workload::{gen_arrivals, Arrival, Mix, Op, RateStep, WorkloadProfile, DAY_MS};

#[derive(Debug, Error)]
pub enum SimError {
    #[error("scenario: {0}")]
    Config(String),
    #[error("scenario: {0}")]
    Toml(#[from] toml::de::Error),
    #[error("unknown fault target {0:?}")]
    UnknownTarget(String),
    #[error("scenario policy: {0}")]
    Policy(#[from] PolicyError),
    #[error("seeding: {0}")]
    Registry(#[from] RegistryError),
}
