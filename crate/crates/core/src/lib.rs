// SPDX-License-Identifier: Apache-2.0

//! Latency-aware circuit selection for onion routing networks.
//!
//! The crate covers anonymity metrics (entropy-based degree, adversary
//! success), a time-smoothed latency graph built from probes, path and
//! betweenness computations over the analytical graph, four relay
//! selection strategies, a seeded network simulator and an experiment
//! runner that produces transfer-time tables.

pub mod config;
pub mod error;
pub mod experiment;
pub mod graph;
pub mod latency;
pub mod metrics;
pub mod model;
pub mod paths;
pub mod rng;
pub mod simnet;
pub mod strategy;

pub use error::{Error, Result};
pub use graph::{AnalyticalGraph, WeightedGraph};
pub use latency::{Latency, LatencyGraph, ProbeOracle, Timestamp};
pub use metrics::{anonymity_degree, entropy, AnonymityDegree, Pmf};
pub use model::{Circuit, Node, NodeId, Provenance, StrategyKind};
