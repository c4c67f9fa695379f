// SPDX-License-Identifier: Apache-2.0

//! Dynamic latency graph maintained by a background measurement loop.
//!
//! Every unordered vertex pair carries a label `(latency, measured_at)`.
//! Labels start out undefined at `t0`. A probe that fails removes the edge
//! but keeps the last label; a first successful probe stores the measured
//! latency; later probes blend old and new values with a time-dependent
//! EWMA weight `α = (t_p - t_0) / (t_q - t_0)`.

use std::collections::{BTreeMap, BTreeSet};
use std::sync::{Arc, RwLock};

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::graph::{AnalyticalGraph, WeightedGraph};
use crate::model::{EdgeKey, NodeId};

/// Logical clock tick.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Default, Serialize, Deserialize)]
#[serde(transparent)]
pub struct Timestamp(pub u64);

/// Measured latency in milliseconds, or undefined (no connectivity).
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Latency {
    Undefined,
    Ms(f64),
}

impl Latency {
    pub fn ms(self) -> Option<f64> {
        match self {
            Latency::Undefined => None,
            Latency::Ms(v) => Some(v),
        }
    }

    pub fn is_defined(self) -> bool {
        matches!(self, Latency::Ms(_))
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EdgeLabel {
    pub latency: Latency,
    pub measured_at: Timestamp,
}

/// Latency source queried by the measurement loop (`c_t`).
pub trait ProbeOracle: Send + Sync {
    fn probe(&self, a: NodeId, b: NodeId, at: Timestamp) -> Latency;
}

impl<F> ProbeOracle for F
where
    F: Fn(NodeId, NodeId, Timestamp) -> Latency + Send + Sync,
{
    fn probe(&self, a: NodeId, b: NodeId, at: Timestamp) -> Latency {
        self(a, b, at)
    }
}

/// EWMA smoothing factor `(tp - t0) / (tq - t0)`.
pub fn alpha(t0: Timestamp, tp: Timestamp, tq: Timestamp) -> Result<f64> {
    if !(t0 <= tp && tp <= tq) {
        return Err(Error::InvalidTimestamps {
            t0: t0.0,
            tp: tp.0,
            tq: tq.0,
        });
    }
    if tq == t0 {
        return Err(Error::ZeroElapsedTime);
    }
    Ok((tp.0 - t0.0) as f64 / (tq.0 - t0.0) as f64)
}

/// What an update did to the edge set.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum UpdateOutcome {
    Disconnected,
    FirstMeasurement,
    Smoothed,
}

#[derive(Debug, Clone, PartialEq)]
pub struct LatencyGraph {
    vertices: BTreeSet<NodeId>,
    edges: BTreeSet<EdgeKey>,
    labels: BTreeMap<EdgeKey, EdgeLabel>,
    start_time: Timestamp,
    client: NodeId,
}

impl LatencyGraph {
    /// Empty edge set; every label implicitly `(UNDEFINED, t0)`.
    pub fn new<I: IntoIterator<Item = NodeId>>(vertices: I, client: NodeId, t0: Timestamp) -> Result<Self> {
        let vertices: BTreeSet<NodeId> = vertices.into_iter().collect();
        if vertices.len() < 2 {
            return Err(Error::TooFewVertices {
                needed: 2,
                got: vertices.len(),
            });
        }
        if !vertices.contains(&client) {
            return Err(Error::ClientNotInVertices(client));
        }
        Ok(LatencyGraph {
            vertices,
            edges: BTreeSet::new(),
            labels: BTreeMap::new(),
            start_time: t0,
            client,
        })
    }

    pub fn client(&self) -> NodeId {
        self.client
    }

    pub fn start_time(&self) -> Timestamp {
        self.start_time
    }

    pub fn vertices(&self) -> impl Iterator<Item = NodeId> + '_ {
        self.vertices.iter().copied()
    }

    pub fn vertex_count(&self) -> usize {
        self.vertices.len()
    }

    pub fn edges(&self) -> impl Iterator<Item = EdgeKey> + '_ {
        self.edges.iter().copied()
    }

    pub fn edge_count(&self) -> usize {
        self.edges.len()
    }

    pub fn has_edge(&self, a: NodeId, b: NodeId) -> bool {
        EdgeKey::new(a, b).is_ok_and(|k| self.edges.contains(&k))
    }

    /// Current label of `{a, b}`; untouched pairs report `(UNDEFINED, t0)`.
    pub fn label(&self, a: NodeId, b: NodeId) -> Result<EdgeLabel> {
        let key = self.key(a, b)?;
        Ok(self.label_of(key))
    }

    fn label_of(&self, key: EdgeKey) -> EdgeLabel {
        self.labels.get(&key).copied().unwrap_or(EdgeLabel {
            latency: Latency::Undefined,
            measured_at: self.start_time,
        })
    }

    fn key(&self, a: NodeId, b: NodeId) -> Result<EdgeKey> {
        for v in [a, b] {
            if !self.vertices.contains(&v) {
                return Err(Error::UnknownVertex(v));
            }
        }
        EdgeKey::new(a, b)
    }

    /// Applies one probe result observed at `tq`.
    pub fn update_label(&mut self, a: NodeId, b: NodeId, observed: Latency, tq: Timestamp) -> Result<UpdateOutcome> {
        let key = self.key(a, b)?;
        if let Latency::Ms(v) = observed {
            if !(v.is_finite() && v >= 0.0) {
                return Err(Error::InvalidWeight(v));
            }
        }
        let prev = self.label_of(key);
        if tq < prev.measured_at {
            return Err(Error::TimeRegression {
                requested: tq.0,
                current: prev.measured_at.0,
            });
        }
        let Latency::Ms(lq) = observed else {
            self.edges.remove(&key);
            return Ok(UpdateOutcome::Disconnected);
        };
        let (latency, outcome) = match prev.latency {
            Latency::Undefined => (lq, UpdateOutcome::FirstMeasurement),
            Latency::Ms(lp) => {
                let a = alpha(self.start_time, prev.measured_at, tq)?;
                (a * lp + (1.0 - a) * lq, UpdateOutcome::Smoothed)
            }
        };
        self.labels.insert(
            key,
            EdgeLabel {
                latency: Latency::Ms(latency),
                measured_at: tq,
            },
        );
        self.edges.insert(key);
        Ok(outcome)
    }

    /// One loop iteration: `probes_per_round` pair draws (with replacement)
    /// probed through `oracle` at time `tq`, which must be later than `t0`.
    pub fn measurement_round<O, R>(
        &mut self,
        oracle: &O,
        probes_per_round: usize,
        tq: Timestamp,
        rng: &mut R,
    ) -> Result<()>
    where
        O: ProbeOracle + ?Sized,
        R: Rng + ?Sized,
    {
        if probes_per_round == 0 {
            return Err(Error::InvalidParameter("probes_per_round must be >= 1".into()));
        }
        if tq <= self.start_time {
            return Err(Error::InvalidParameter(format!(
                "measurement round at {} does not follow t0 = {}",
                tq.0, self.start_time.0
            )));
        }
        let ids: Vec<NodeId> = self.vertices.iter().copied().collect();
        let n = ids.len();
        for _ in 0..probes_per_round {
            let i = rng.random_range(0..n);
            let mut j = rng.random_range(0..n - 1);
            if j >= i {
                j += 1;
            }
            let (a, b) = (ids[i], ids[j]);
            let observed = oracle.probe(a, b, tq);
            self.update_label(a, b, observed, tq)?;
        }
        Ok(())
    }

    /// Every current edge with its latency label as weight, client included.
    pub fn connectivity_graph(&self) -> WeightedGraph {
        let mut g = WeightedGraph::new(self.vertices.iter().copied());
        for &key in &self.edges {
            let w = self.label_of(key).latency.ms().expect("edges carry defined labels");
            g.add_edge(key.a(), key.b(), w).expect("valid edge");
        }
        g
    }

    /// `G'(V', E')`: the client and its incident edges removed.
    pub fn analytical_graph(&self) -> AnalyticalGraph {
        let mut g = WeightedGraph::new(self.vertices.iter().copied().filter(|&v| v != self.client));
        for &key in self.edges.iter().filter(|k| !k.touches(self.client)) {
            let w = self.label_of(key).latency.ms().expect("edges carry defined labels");
            g.add_edge(key.a(), key.b(), w).expect("valid edge");
        }
        g
    }

    pub fn to_snapshot(&self) -> GraphSnapshot {
        let record = |key: &EdgeKey| {
            let l = self.label_of(*key);
            EdgeRecord {
                a: key.a(),
                b: key.b(),
                latency_ms: l.latency.ms().expect("stored labels are defined"),
                measured_at: l.measured_at,
            }
        };
        GraphSnapshot {
            vertices: self.vertices.iter().copied().collect(),
            edges: self.edges.iter().map(record).collect(),
            retained: self
                .labels
                .keys()
                .filter(|k| !self.edges.contains(k))
                .map(record)
                .collect(),
            client: self.client,
            t0: self.start_time,
        }
    }

    pub fn from_snapshot(s: &GraphSnapshot) -> Result<Self> {
        let mut g = LatencyGraph::new(s.vertices.iter().copied(), s.client, s.t0)
            .map_err(|e| Error::InvalidSnapshot(e.to_string()))?;
        if g.vertices.len() != s.vertices.len() {
            return Err(Error::InvalidSnapshot("duplicate vertices".into()));
        }
        for (records, in_edge_set) in [(&s.edges, true), (&s.retained, false)] {
            for r in records {
                let key = g.key(r.a, r.b).map_err(|e| Error::InvalidSnapshot(e.to_string()))?;
                if !(r.latency_ms.is_finite() && r.latency_ms >= 0.0) {
                    return Err(Error::InvalidSnapshot(format!(
                        "latency {} on {}-{}",
                        r.latency_ms, r.a, r.b
                    )));
                }
                if r.measured_at < s.t0 {
                    return Err(Error::InvalidSnapshot(format!("label on {}-{} predates t0", r.a, r.b)));
                }
                let label = EdgeLabel {
                    latency: Latency::Ms(r.latency_ms),
                    measured_at: r.measured_at,
                };
                if g.labels.insert(key, label).is_some() {
                    return Err(Error::InvalidSnapshot(format!("edge {}-{} listed twice", r.a, r.b)));
                }
                if in_edge_set {
                    g.edges.insert(key);
                }
            }
        }
        Ok(g)
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string(&self.to_snapshot())?)
    }

    pub fn from_json(s: &str) -> Result<Self> {
        let snapshot: GraphSnapshot = serde_json::from_str(s)?;
        LatencyGraph::from_snapshot(&snapshot)
    }
}

/// One labelled pair in a [`GraphSnapshot`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EdgeRecord {
    pub a: NodeId,
    pub b: NodeId,
    pub latency_ms: f64,
    pub measured_at: Timestamp,
}

/// JSON form of a latency graph.
///
/// `edges` lists the current edge set. `retained` (optional on input) holds
/// labels of pairs that were measured once but are currently disconnected.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GraphSnapshot {
    pub vertices: Vec<NodeId>,
    pub edges: Vec<EdgeRecord>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub retained: Vec<EdgeRecord>,
    pub client: NodeId,
    pub t0: Timestamp,
}

/// Latency graph shared between one measurement writer and many readers.
///
/// Readers take cloned snapshots; the writer holds the lock for one round.
#[derive(Debug, Clone)]
pub struct SharedLatencyGraph {
    inner: Arc<RwLock<SharedState>>,
}

#[derive(Debug)]
struct SharedState {
    graph: LatencyGraph,
    now: Timestamp,
}

impl SharedLatencyGraph {
    pub fn new(graph: LatencyGraph) -> Self {
        let now = graph.start_time();
        SharedLatencyGraph {
            inner: Arc::new(RwLock::new(SharedState { graph, now })),
        }
    }

    pub fn snapshot(&self) -> LatencyGraph {
        self.inner.read().expect("lock poisoned").graph.clone()
    }

    pub fn now(&self) -> Timestamp {
        self.inner.read().expect("lock poisoned").now
    }

    /// Advances the clock by `ticks` and runs one measurement round.
    pub fn step<O, R>(&self, oracle: &O, probes_per_round: usize, ticks: u64, rng: &mut R) -> Result<Timestamp>
    where
        O: ProbeOracle + ?Sized,
        R: Rng + ?Sized,
    {
        let mut state = self.inner.write().expect("lock poisoned");
        let tq = Timestamp(state.now.0 + ticks.max(1));
        state.graph.measurement_round(oracle, probes_per_round, tq, rng)?;
        state.now = tq;
        Ok(tq)
    }

    /// Runs `rounds` consecutive steps.
    pub fn warm_up<O, R>(
        &self,
        oracle: &O,
        probes_per_round: usize,
        ticks: u64,
        rounds: usize,
        rng: &mut R,
    ) -> Result<()>
    where
        O: ProbeOracle + ?Sized,
        R: Rng + ?Sized,
    {
        for _ in 0..rounds {
            self.step(oracle, probes_per_round, ticks, rng)?;
        }
        Ok(())
    }
}

/// Handle to a measurement loop running on its own thread.
pub struct MonitorHandle {
    stop: Arc<std::sync::atomic::AtomicBool>,
    thread: Option<std::thread::JoinHandle<Result<()>>>,
}

impl MonitorHandle {
    /// Stops the loop after its current round and reports the first error, if any.
    pub fn stop(mut self) -> Result<()> {
        self.stop.store(true, std::sync::atomic::Ordering::SeqCst);
        self.thread
            .take()
            .map(|t| t.join().expect("monitor thread panicked"))
            .unwrap_or(Ok(()))
    }
}

impl Drop for MonitorHandle {
    fn drop(&mut self) {
        self.stop.store(true, std::sync::atomic::Ordering::SeqCst);
        if let Some(t) = self.thread.take() {
            let _ = t.join();
        }
    }
}

/// Spawns the background loop: one round every `interval`, `ticks` clock
/// units per round.
pub fn spawn_monitor<O>(
    shared: SharedLatencyGraph,
    oracle: Arc<O>,
    probes_per_round: usize,
    ticks: u64,
    interval: std::time::Duration,
    seed: u64,
) -> MonitorHandle
where
    O: ProbeOracle + 'static,
{
    let stop = Arc::new(std::sync::atomic::AtomicBool::new(false));
    let flag = Arc::clone(&stop);
    let thread = std::thread::spawn(move || {
        let mut rng = crate::rng::seeded(seed);
        while !flag.load(std::sync::atomic::Ordering::SeqCst) {
            shared.step(oracle.as_ref(), probes_per_round, ticks, &mut rng)?;
            std::thread::sleep(interval);
        }
        Ok(())
    });
    MonitorHandle {
        stop,
        thread: Some(thread),
    }
}
