//! Request gateway: authentication, routing, failure detection and billing.

pub mod auth;
pub mod billing;
pub mod routing;
pub mod service;
