// SPDX-License-Identifier: Apache-2.0

//! Core data model: relay identities, nodes and circuits.

use std::collections::BTreeSet;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Identity of an overlay relay (or of the client).
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct NodeId(pub u32);

impl fmt::Display for NodeId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0)
    }
}

impl From<u32> for NodeId {
    fn from(v: u32) -> Self {
        NodeId(v)
    }
}

/// Unordered vertex pair, stored with the smaller id first.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct EdgeKey(NodeId, NodeId);

impl EdgeKey {
    pub fn new(a: NodeId, b: NodeId) -> Result<Self> {
        match a.cmp(&b) {
            std::cmp::Ordering::Less => Ok(EdgeKey(a, b)),
            std::cmp::Ordering::Greater => Ok(EdgeKey(b, a)),
            std::cmp::Ordering::Equal => Err(Error::SelfEdge(a)),
        }
    }

    pub fn a(self) -> NodeId {
        self.0
    }

    pub fn b(self) -> NodeId {
        self.1
    }

    pub fn touches(self, v: NodeId) -> bool {
        self.0 == v || self.1 == v
    }
}

/// An overlay relay with its country and advertised bandwidth (KB/s).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Node {
    pub id: NodeId,
    pub country: String,
    pub bandwidth: f64,
}

impl Node {
    pub fn new(id: impl Into<NodeId>, country: impl Into<String>, bandwidth: f64) -> Result<Self> {
        let country = country.into();
        if country.is_empty() {
            return Err(Error::InvalidParameter("node country must be non-empty".into()));
        }
        if !(bandwidth.is_finite() && bandwidth > 0.0) {
            return Err(Error::InvalidBandwidth(bandwidth));
        }
        Ok(Node {
            id: id.into(),
            country,
            bandwidth,
        })
    }
}

/// How a circuit was obtained.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Provenance {
    /// Drawn directly by a random, geographical or bandwidth strategy.
    Direct,
    /// Minimum-latency path found in the latency graph.
    GraphPath,
    /// Latency-graph strategy gave up after `max_iter` exits and drew uniformly.
    RandomFallback,
}

impl fmt::Display for Provenance {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Provenance::Direct => "direct",
            Provenance::GraphPath => "graph-path",
            Provenance::RandomFallback => "random-fallback",
        })
    }
}

/// Ordered relay sequence `<s, e, r_1, .., x>` together with its link set.
///
/// `relays[0]` is the entry, the last relay is the exit. The circuit length
/// is the number of links, which equals the number of relays: the first link
/// joins the client to the entry.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(try_from = "CircuitRecord", into = "CircuitRecord")]
pub struct Circuit {
    client: NodeId,
    relays: Vec<NodeId>,
    links: Vec<(NodeId, NodeId)>,
    provenance: Provenance,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct CircuitRecord {
    client: NodeId,
    relays: Vec<NodeId>,
    provenance: Provenance,
}

impl TryFrom<CircuitRecord> for Circuit {
    type Error = Error;

    fn try_from(r: CircuitRecord) -> Result<Self> {
        Circuit::new(r.client, r.relays, r.provenance)
    }
}

impl From<Circuit> for CircuitRecord {
    fn from(c: Circuit) -> Self {
        CircuitRecord {
            client: c.client,
            relays: c.relays,
            provenance: c.provenance,
        }
    }
}

impl Circuit {
    pub fn new(client: NodeId, relays: Vec<NodeId>, provenance: Provenance) -> Result<Self> {
        if relays.is_empty() {
            return Err(Error::InvalidCircuit("circuit has no relays".into()));
        }
        let mut seen = BTreeSet::new();
        for &r in &relays {
            if r == client {
                return Err(Error::InvalidCircuit(format!("client {client} appears as a relay")));
            }
            if !seen.insert(r) {
                return Err(Error::InvalidCircuit(format!("relay {r} repeated")));
            }
        }
        let links = std::iter::once(client)
            .chain(relays.iter().copied())
            .zip(relays.iter().copied())
            .collect();
        Ok(Circuit {
            client,
            relays,
            links,
            provenance,
        })
    }

    pub fn client(&self) -> NodeId {
        self.client
    }

    pub fn relays(&self) -> &[NodeId] {
        &self.relays
    }

    pub fn links(&self) -> &[(NodeId, NodeId)] {
        &self.links
    }

    pub fn provenance(&self) -> Provenance {
        self.provenance
    }

    /// Number of links (δ).
    pub fn len(&self) -> usize {
        self.links.len()
    }

    pub fn is_empty(&self) -> bool {
        self.links.is_empty()
    }

    pub fn entry(&self) -> NodeId {
        self.relays[0]
    }

    pub fn exit(&self) -> NodeId {
        self.relays[self.relays.len() - 1]
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string(self)?)
    }

    pub fn from_json(s: &str) -> Result<Self> {
        Ok(serde_json::from_str(s)?)
    }
}

/// The four selection strategies.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum StrategyKind {
    Rnd,
    Geo,
    Bw,
    Grp,
}

impl StrategyKind {
    pub const ALL: [StrategyKind; 4] = [
        StrategyKind::Rnd,
        StrategyKind::Geo,
        StrategyKind::Bw,
        StrategyKind::Grp,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            StrategyKind::Rnd => "rnd",
            StrategyKind::Geo => "geo",
            StrategyKind::Bw => "bw",
            StrategyKind::Grp => "grp",
        }
    }
}

impl fmt::Display for StrategyKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for StrategyKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "rnd" => Ok(StrategyKind::Rnd),
            "geo" => Ok(StrategyKind::Geo),
            "bw" => Ok(StrategyKind::Bw),
            "grp" => Ok(StrategyKind::Grp),
            other => Err(Error::Parse(format!(
                "unknown strategy {other:?} (expected rnd|geo|bw|grp)"
            ))),
        }
    }
}
