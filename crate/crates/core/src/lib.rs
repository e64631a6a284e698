//! Hybrid-cloud people registry.

pub mod elasticity;
pub mod gateway;
pub mod nid;
pub mod registry;
pub mod replication;
pub mod simharness;
pub mod storage;
pub mod synth;
