// SPDX-License-Identifier: Apache-2.0

//! Synthetic overlay network: node populations, 1-D k-means bandwidth
//! clustering, a probe oracle and a linear transfer-time model.

use std::collections::BTreeMap;

use indexmap::IndexMap;
use rand::Rng;
use rand_distr::{Distribution, Exp, LogNormal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::latency::{Latency, ProbeOracle, Timestamp};
use crate::model::{Circuit, Node, NodeId};
use crate::rng;

/// Countries, size and bandwidth material of a population.
#[derive(Debug, Clone, PartialEq)]
pub struct PopulationSpec {
    pub country_counts: IndexMap<String, usize>,
    pub total: usize,
    pub bandwidth_sample: Vec<f64>,
    pub cluster_count: usize,
}

impl PopulationSpec {
    pub fn validate(&self) -> Result<()> {
        let sum: usize = self.country_counts.values().sum();
        if sum != self.total {
            return Err(Error::InvalidPopulation(format!(
                "country counts add up to {sum}, total is {}",
                self.total
            )));
        }
        if self.total == 0 {
            return Err(Error::InvalidPopulation("empty population".into()));
        }
        if let Some((c, _)) = self.country_counts.iter().find(|(c, _)| c.is_empty()) {
            return Err(Error::InvalidPopulation(format!("bad country code {c:?}")));
        }
        if self.cluster_count == 0 || self.cluster_count > self.bandwidth_sample.len() {
            return Err(Error::InvalidPopulation(format!(
                "cluster count {} for {} bandwidth samples",
                self.cluster_count,
                self.bandwidth_sample.len()
            )));
        }
        if let Some(b) = self.bandwidth_sample.iter().find(|b| !(b.is_finite() && **b > 0.0)) {
            return Err(Error::InvalidBandwidth(*b));
        }
        Ok(())
    }
}

/// Lloyd's algorithm on 1-D data, seeded with `cluster_count` distinct
/// sample values. Returns the centroids in ascending order.
pub fn kmeans<R: Rng + ?Sized>(
    values: &[f64],
    cluster_count: usize,
    max_rounds: usize,
    rng: &mut R,
) -> Result<Vec<f64>> {
    if cluster_count == 0 {
        return Err(Error::InvalidParameter("cluster count must be >= 1".into()));
    }
    if cluster_count > values.len() {
        return Err(Error::InvalidParameter(format!(
            "{cluster_count} clusters for {} values",
            values.len()
        )));
    }
    if let Some(v) = values.iter().find(|v| !v.is_finite()) {
        return Err(Error::InvalidParameter(format!("non-finite value {v}")));
    }
    let mut distinct = values.to_vec();
    distinct.sort_by(f64::total_cmp);
    distinct.dedup();
    if distinct.len() < cluster_count {
        return Err(Error::InvalidParameter(format!(
            "{cluster_count} clusters but only {} distinct values",
            distinct.len()
        )));
    }
    let mut centroids: Vec<f64> = rand::seq::index::sample(rng, distinct.len(), cluster_count)
        .into_iter()
        .map(|i| distinct[i])
        .collect();

    let nearest = |centroids: &[f64], v: f64| {
        let mut best = 0;
        for (j, c) in centroids.iter().enumerate().skip(1) {
            if (v - c).abs() < (v - centroids[best]).abs() {
                best = j;
            }
        }
        best
    };

    let mut assignment: Vec<usize> = values.iter().map(|&v| nearest(&centroids, v)).collect();
    for _ in 0..max_rounds {
        let mut sums = vec![0.0; cluster_count];
        let mut counts = vec![0usize; cluster_count];
        for (&v, &a) in values.iter().zip(&assignment) {
            sums[a] += v;
            counts[a] += 1;
        }
        for j in 0..cluster_count {
            if counts[j] > 0 {
                centroids[j] = sums[j] / counts[j] as f64;
            }
        }
        let next: Vec<usize> = values.iter().map(|&v| nearest(&centroids, v)).collect();
        if next == assignment {
            break;
        }
        assignment = next;
    }
    centroids.sort_by(f64::total_cmp);
    Ok(centroids)
}

/// Nodes `0..total` laid out country by country; each node's bandwidth is
/// the centroid of a cluster drawn uniformly at random.
pub fn generate_population<R: Rng + ?Sized>(spec: &PopulationSpec, rng: &mut R) -> Result<Vec<Node>> {
    spec.validate()?;
    let centroids = kmeans(&spec.bandwidth_sample, spec.cluster_count, 100, rng)?;
    let mut nodes = Vec::with_capacity(spec.total);
    for (country, &count) in &spec.country_counts {
        for _ in 0..count {
            let bw = centroids[rng.random_range(0..centroids.len())];
            nodes.push(Node::new(nodes.len() as u32, country.clone(), bw)?);
        }
    }
    Ok(nodes)
}

/// Log-normal bandwidth sample (KB/s) standing in for directory data.
pub fn lognormal_bandwidths(size: usize, median_kbps: f64, sigma: f64, seed: u64) -> Result<Vec<f64>> {
    if !(median_kbps > 0.0 && median_kbps.is_finite()) {
        return Err(Error::InvalidBandwidth(median_kbps));
    }
    let dist =
        LogNormal::new(median_kbps.ln(), sigma).map_err(|e| Error::InvalidParameter(format!("log-normal: {e}")))?;
    let mut r = rng::seeded(seed);
    Ok((0..size).map(|_| dist.sample(&mut r)).collect())
}

/// Parses a bandwidth sample: one positive number per line (KB/s); blank
/// lines and `#` comments are ignored.
pub fn parse_bandwidth_sample(text: &str) -> Result<Vec<f64>> {
    let mut out = Vec::new();
    for (lineno, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let v: f64 = line
            .parse()
            .map_err(|_| Error::Parse(format!("line {}: {line:?} is not a number", lineno + 1)))?;
        if !(v.is_finite() && v > 0.0) {
            return Err(Error::Parse(format!("line {}: bandwidth must be > 0", lineno + 1)));
        }
        out.push(v);
    }
    if out.is_empty() {
        return Err(Error::Parse("bandwidth sample is empty".into()));
    }
    Ok(out)
}

/// Pairwise latency model.
///
/// A pair's deterministic latency is its base (intra- or inter-country)
/// plus a stable offset `base * pair_spread * u`, with `u ∈ [0, 1)` derived
/// from the pair and the network seed. Each probe adds exponential jitter
/// with mean `jitter_ms` and fails with probability `down_prob`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LatencyModel {
    pub intra_ms: f64,
    pub inter_ms: f64,
    pub jitter_ms: f64,
    pub down_prob: f64,
    #[serde(default = "default_pair_spread")]
    pub pair_spread: f64,
}

fn default_pair_spread() -> f64 {
    0.25
}

impl Default for LatencyModel {
    fn default() -> Self {
        LatencyModel {
            intra_ms: 20.0,
            inter_ms: 150.0,
            jitter_ms: 10.0,
            down_prob: 0.02,
            pair_spread: default_pair_spread(),
        }
    }
}

impl LatencyModel {
    pub fn validate(&self) -> Result<()> {
        let finite_nonneg = |v: f64| v.is_finite() && v >= 0.0;
        if !(finite_nonneg(self.intra_ms) && finite_nonneg(self.inter_ms)) {
            return Err(Error::Config("latency bases must be finite and >= 0".into()));
        }
        if self.inter_ms < self.intra_ms {
            return Err(Error::Config("latency.inter_ms must be >= latency.intra_ms".into()));
        }
        if !finite_nonneg(self.jitter_ms) || !finite_nonneg(self.pair_spread) {
            return Err(Error::Config("jitter and pair spread must be finite and >= 0".into()));
        }
        if !(0.0..=1.0).contains(&self.down_prob) {
            return Err(Error::Config("latency.down_prob must lie in [0, 1]".into()));
        }
        Ok(())
    }
}

const PROBE_SALT: u64 = 0x70_726f_6265;

/// Simulated network: node locations plus a latency model. Implements the
/// probe oracle; every call derives its randomness from the seed, the pair
/// and the timestamp, so call order never changes results.
#[derive(Debug, Clone)]
pub struct SimNetwork {
    model: LatencyModel,
    countries: BTreeMap<NodeId, String>,
    seed: u64,
}

impl SimNetwork {
    pub fn new<'a, I>(model: LatencyModel, locations: I, seed: u64) -> Result<Self>
    where
        I: IntoIterator<Item = (NodeId, &'a str)>,
    {
        model.validate()?;
        let countries = locations.into_iter().map(|(id, c)| (id, c.to_string())).collect();
        Ok(SimNetwork { model, countries, seed })
    }

    /// Network over a population plus a client located in `client_country`.
    pub fn for_population(
        model: LatencyModel,
        nodes: &[Node],
        client: NodeId,
        client_country: &str,
        seed: u64,
    ) -> Result<Self> {
        let locations = nodes
            .iter()
            .map(|n| (n.id, n.country.as_str()))
            .chain(std::iter::once((client, client_country)));
        SimNetwork::new(model, locations, seed)
    }

    pub fn model(&self) -> &LatencyModel {
        &self.model
    }

    fn country(&self, v: NodeId) -> Result<&str> {
        self.countries
            .get(&v)
            .map(String::as_str)
            .ok_or(Error::UnknownVertex(v))
    }

    /// Base plus stable pair offset, without jitter.
    pub fn base_latency(&self, a: NodeId, b: NodeId) -> Result<f64> {
        if a == b {
            return Err(Error::SelfProbe(a));
        }
        let base = if self.country(a)? == self.country(b)? {
            self.model.intra_ms
        } else {
            self.model.inter_ms
        };
        let (lo, hi) = if a < b { (a, b) } else { (b, a) };
        let h = rng::derive_seed(self.seed, &[u64::from(lo.0), u64::from(hi.0)]);
        let u = (h >> 11) as f64 / (1u64 << 53) as f64;
        Ok(base + base * self.model.pair_spread * u)
    }

    fn jitter<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        if self.model.jitter_ms > 0.0 {
            Exp::new(1.0 / self.model.jitter_ms).expect("positive rate").sample(rng)
        } else {
            0.0
        }
    }

    /// One measurement with caller-supplied randomness.
    pub fn probe_with<R: Rng + ?Sized>(&self, a: NodeId, b: NodeId, rng: &mut R) -> Result<Latency> {
        let base = self.base_latency(a, b)?;
        if self.model.down_prob > 0.0 && rng.random::<f64>() < self.model.down_prob {
            return Ok(Latency::Undefined);
        }
        Ok(Latency::Ms(base + self.jitter(rng)))
    }

    /// Latency experienced by traffic on a link (connectivity assumed).
    pub fn link_latency<R: Rng + ?Sized>(&self, a: NodeId, b: NodeId, rng: &mut R) -> Result<f64> {
        Ok(self.base_latency(a, b)? + self.jitter(rng))
    }

    pub fn probe_at(&self, a: NodeId, b: NodeId, at: Timestamp) -> Result<Latency> {
        let (lo, hi) = if a < b { (a, b) } else { (b, a) };
        let mut r = rng::derived(self.seed, &[PROBE_SALT, u64::from(lo.0), u64::from(hi.0), at.0]);
        self.probe_with(a, b, &mut r)
    }
}

impl ProbeOracle for SimNetwork {
    fn probe(&self, a: NodeId, b: NodeId, at: Timestamp) -> Latency {
        self.probe_at(a, b, at).unwrap_or(Latency::Undefined)
    }
}

/// Linear stand-in for a page download through a circuit.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TransferModel {
    /// Round trips charged per link latency.
    pub handshake_per_link: f64,
    pub processing_ms: f64,
    #[serde(default)]
    pub page_kb: f64,
}

impl Default for TransferModel {
    fn default() -> Self {
        TransferModel {
            handshake_per_link: 4.0,
            processing_ms: 25.0,
            page_kb: 320.0,
        }
    }
}

impl TransferModel {
    pub fn with_page(self, page_kb: f64) -> Self {
        TransferModel { page_kb, ..self }
    }
}

/// Seconds to fetch a page: `Σ latency · handshake / 1000 + δ · processing /
/// 1000 + page / min(bandwidth)`.
pub fn transfer_time(
    model: &TransferModel,
    circuit: &Circuit,
    link_latencies: &[f64],
    bandwidths: &[f64],
) -> Result<f64> {
    let delta = circuit.len();
    if link_latencies.len() != delta || bandwidths.len() != delta {
        return Err(Error::InvalidParameter(format!(
            "circuit of length {delta} with {} latencies and {} bandwidths",
            link_latencies.len(),
            bandwidths.len()
        )));
    }
    for v in [model.handshake_per_link, model.processing_ms, model.page_kb] {
        if !(v.is_finite() && v >= 0.0) {
            return Err(Error::InvalidParameter(format!("transfer parameter {v}")));
        }
    }
    if let Some(l) = link_latencies.iter().find(|l| !(l.is_finite() && **l >= 0.0)) {
        return Err(Error::InvalidWeight(*l));
    }
    if let Some(b) = bandwidths.iter().find(|b| !(b.is_finite() && **b > 0.0)) {
        return Err(Error::InvalidBandwidth(*b));
    }
    let latency: f64 = link_latencies.iter().sum();
    let min_bw = bandwidths.iter().copied().fold(f64::INFINITY, f64::min);
    Ok(latency * model.handshake_per_link / 1000.0
        + delta as f64 * model.processing_ms / 1000.0
        + model.page_kb / min_bw)
}
