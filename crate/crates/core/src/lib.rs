//! Deterministic federated-learning simulator.
//!
//! The crate covers the whole pipeline of a label-skew federated experiment:
//! a small double-precision network engine ([`nn`]), datasets and Dirichlet
//! partitioning ([`data`]), knowledge-anchor construction and the anchored
//! local objective ([`anchor`]), round orchestration with FedAvg, FedProx and
//! FedKA local strategies ([`federation`]), and class-wise forgetting metrics
//! ([`metrics`]). Experiments are described by an [`config::ExperimentConfig`]
//! and are a pure function of that config and its master seed.

pub mod anchor;
pub mod config;
pub mod data;
pub mod diagnostics;
pub mod error;
pub mod federation;
pub mod metrics;
pub mod nn;
pub mod rng;

pub use error::{ConfigIssue, Error, Result};
