// SPDX-License-Identifier: Apache-2.0

//! Entropy-based anonymity metrics.
//!
//! The anonymity degree of a node-selection distribution over a population
//! of `n` relays is its Shannon entropy normalised by `log2(n)`, the entropy
//! of the uniform distribution. `0 · log2(0)` is taken as `0`.

use std::collections::BTreeMap;

use serde::Serialize;

use crate::error::{Error, Result};
use crate::graph::WeightedGraph;
use crate::model::NodeId;
use crate::paths::{betweenness_table_with_limits, lb_estimate, ExactLimits};
use crate::rng;

/// Tolerance on the total mass of a pmf.
pub const PMF_TOLERANCE: f64 = 1e-9;

/// Node-selection probability mass function.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Pmf {
    probabilities: BTreeMap<NodeId, f64>,
}

impl Pmf {
    /// Accepts probabilities in `[0, 1]` summing to `1 ± 1e-9`, renormalised.
    pub fn new(probabilities: BTreeMap<NodeId, f64>) -> Result<Self> {
        if probabilities.is_empty() {
            return Err(Error::InvalidPmf("empty distribution".into()));
        }
        if let Some((id, p)) = probabilities
            .iter()
            .find(|(_, p)| !(p.is_finite() && (0.0..=1.0).contains(*p)))
        {
            return Err(Error::InvalidPmf(format!("p({id}) = {p} outside [0, 1]")));
        }
        let sum: f64 = probabilities.values().sum();
        if (sum - 1.0).abs() > PMF_TOLERANCE {
            return Err(Error::InvalidPmf(format!("probabilities sum to {sum}")));
        }
        let probabilities = if sum == 1.0 {
            probabilities
        } else {
            probabilities.into_iter().map(|(k, p)| (k, p / sum)).collect()
        };
        Ok(Pmf { probabilities })
    }

    /// Uniform distribution over the given (deduplicated) ids.
    pub fn uniform<I: IntoIterator<Item = NodeId>>(ids: I) -> Result<Self> {
        let mut probabilities: BTreeMap<NodeId, f64> = ids.into_iter().map(|id| (id, 0.0)).collect();
        if probabilities.is_empty() {
            return Err(Error::InvalidPmf("empty distribution".into()));
        }
        let p = 1.0 / probabilities.len() as f64;
        probabilities.values_mut().for_each(|v| *v = p);
        Ok(Pmf { probabilities })
    }

    /// Normalises non-negative weights into a pmf.
    pub fn from_weights<I: IntoIterator<Item = (NodeId, f64)>>(weights: I) -> Result<Self> {
        let weights: BTreeMap<NodeId, f64> = weights.into_iter().collect();
        if let Some((id, w)) = weights.iter().find(|(_, w)| !(w.is_finite() && **w >= 0.0)) {
            return Err(Error::InvalidPmf(format!("weight of {id} is {w}")));
        }
        let total: f64 = weights.values().sum();
        if !(total > 0.0 && total.is_finite()) {
            return Err(Error::InvalidPmf(format!("total weight {total}")));
        }
        Ok(Pmf {
            probabilities: weights.into_iter().map(|(k, w)| (k, w / total)).collect(),
        })
    }

    pub fn get(&self, id: NodeId) -> f64 {
        self.probabilities.get(&id).copied().unwrap_or(0.0)
    }

    pub fn iter(&self) -> impl Iterator<Item = (NodeId, f64)> + '_ {
        self.probabilities.iter().map(|(&k, &p)| (k, p))
    }

    /// Number of ids carried, zero-probability ones included.
    pub fn len(&self) -> usize {
        self.probabilities.len()
    }

    pub fn is_empty(&self) -> bool {
        self.probabilities.is_empty()
    }

    /// Number of ids with non-zero probability.
    pub fn support_size(&self) -> usize {
        self.probabilities.values().filter(|p| **p > 0.0).count()
    }
}

/// Shannon entropy in bits.
///
/// Equal probabilities are grouped, so a distribution that is uniform on
/// its support evaluates to exactly `log2(support)`.
pub fn entropy(pmf: &Pmf) -> f64 {
    let mut groups: BTreeMap<u64, usize> = BTreeMap::new();
    for (_, p) in pmf.iter().filter(|(_, p)| *p > 0.0) {
        *groups.entry(p.to_bits()).or_default() += 1;
    }
    if groups.len() == 1 {
        let (_, &count) = groups.iter().next().expect("one group");
        return (count as f64).log2();
    }
    let h: f64 = groups
        .into_iter()
        .map(|(bits, count)| {
            let p = f64::from_bits(bits);
            -(count as f64) * p * p.log2()
        })
        .sum();
    h.max(0.0)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct AnonymityDegree {
    pub value: f64,
    pub entropy_bits: f64,
    pub max_entropy_bits: f64,
    pub population_size: usize,
    /// Set when the underlying distribution was estimated by sampling.
    pub estimated: bool,
}

fn max_entropy(population_size: usize) -> Result<f64> {
    if population_size < 2 {
        return Err(Error::DegenerateNetwork(population_size));
    }
    Ok((population_size as f64).log2())
}

/// `H(X) / log2(n)`.
pub fn anonymity_degree(pmf: &Pmf, population_size: usize) -> Result<AnonymityDegree> {
    let max = max_entropy(population_size)?;
    if pmf.support_size() > population_size {
        return Err(Error::InvalidPmf(format!(
            "support of {} nodes exceeds population of {population_size}",
            pmf.support_size()
        )));
    }
    let h = entropy(pmf);
    Ok(AnonymityDegree {
        value: (h / max).clamp(0.0, 1.0),
        entropy_bits: h,
        max_entropy_bits: max,
        population_size,
        estimated: false,
    })
}

/// Degree of the geographical strategy: `log2(m) / log2(n)`.
pub fn degree_geo(country_count: usize, population_size: usize) -> Result<f64> {
    let max = max_entropy(population_size)?;
    if country_count == 0 {
        return Err(Error::EmptyCountry);
    }
    if country_count > population_size {
        return Err(Error::CountryLargerThanPopulation {
            country: country_count,
            population: population_size,
        });
    }
    Ok((country_count as f64).log2() / max)
}

/// Degree of the bandwidth strategy, with `p_i = bw_i / Σ bw`.
pub fn degree_bw(bandwidths: &[f64]) -> Result<f64> {
    if bandwidths.len() < 2 {
        return Err(Error::DegenerateNetwork(bandwidths.len()));
    }
    if let Some(&bad) = bandwidths.iter().find(|b| !(b.is_finite() && **b > 0.0)) {
        return Err(Error::InvalidBandwidth(bad));
    }
    let pmf = Pmf::from_weights(bandwidths.iter().enumerate().map(|(i, &b)| (NodeId(i as u32), b)))?;
    Ok(anonymity_degree(&pmf, bandwidths.len())?.value)
}

/// How LB is obtained when a graph exceeds the exact-enumeration limits.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct LbEstimator {
    pub limits: ExactLimits,
    pub samples: usize,
    pub seed: u64,
}

impl Default for LbEstimator {
    fn default() -> Self {
        LbEstimator {
            limits: ExactLimits::default(),
            samples: 20_000,
            seed: 0x5eed,
        }
    }
}

/// LB pmf of the analytical graph for path length `lambda` (in edges),
/// exact when the graph is within the limits and sampled otherwise.
pub fn grp_pmf(graph: &WeightedGraph, lambda: usize, estimator: &LbEstimator) -> Result<(Pmf, bool)> {
    let table = if estimator.limits.admits(graph.vertex_count(), lambda) {
        betweenness_table_with_limits(graph, lambda, estimator.limits)?
    } else {
        lb_estimate(graph, lambda, estimator.samples, &mut rng::seeded(estimator.seed))?
    };
    Ok((table.to_pmf()?, table.estimated))
}

/// Degree of the latency-graph strategy from the LB distribution.
pub fn degree_grp(graph: &WeightedGraph, lambda: usize, estimator: &LbEstimator) -> Result<AnonymityDegree> {
    let n = graph.vertex_count();
    max_entropy(n)?;
    let (pmf, estimated) = grp_pmf(graph, lambda, estimator)?;
    let mut d = anonymity_degree(&pmf, n)?;
    d.estimated = estimated;
    Ok(d)
}

/// Selection probabilities of the adversary-controlled relays.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct AdversaryModel {
    controlled_probabilities: Vec<f64>,
    uniform_population: Option<usize>,
}

impl AdversaryModel {
    pub fn new(controlled_probabilities: Vec<f64>) -> Result<Self> {
        if let Some(p) = controlled_probabilities
            .iter()
            .find(|p| !(p.is_finite() && (0.0..=1.0).contains(*p)))
        {
            return Err(Error::InvalidAdversary(format!("probability {p} outside [0, 1]")));
        }
        let sum: f64 = controlled_probabilities.iter().sum();
        if sum > 1.0 + PMF_TOLERANCE {
            return Err(Error::InvalidAdversary(format!("controlled mass {sum} exceeds 1")));
        }
        Ok(AdversaryModel {
            controlled_probabilities,
            uniform_population: None,
        })
    }

    /// `c` controlled relays out of `n`, each selected with probability `1/n`.
    pub fn uniform(controlled: usize, population_size: usize) -> Result<Self> {
        if population_size == 0 || controlled > population_size {
            return Err(Error::InvalidAdversary(format!(
                "{controlled} controlled nodes out of {population_size}"
            )));
        }
        Ok(AdversaryModel {
            controlled_probabilities: vec![1.0 / population_size as f64; controlled],
            uniform_population: Some(population_size),
        })
    }

    pub fn controlled_count(&self) -> usize {
        self.controlled_probabilities.len()
    }

    pub fn controlled_probabilities(&self) -> &[f64] {
        &self.controlled_probabilities
    }
}

/// Probability that both entry and exit are controlled: `(Σ p_i)²`.
///
/// For the uniform model this is `(c/n)²`, evaluated as `c² / n²` so the
/// result is the correctly rounded value of the exact fraction.
pub fn adversary_success(model: &AdversaryModel) -> f64 {
    if let Some(n) = model.uniform_population {
        let c = model.controlled_count() as f64;
        let n = n as f64;
        return (c * c) / (n * n);
    }
    let mass: f64 = model.controlled_probabilities.iter().sum();
    mass.min(1.0).powi(2)
}

/// Exact probability that a uniformly drawn circuit without repeated relays
/// has both entry and exit controlled: `c (c - 1) / (n (n - 1))`.
pub fn adversary_success_without_replacement(controlled: usize, population_size: usize) -> Result<f64> {
    if population_size < 2 || controlled > population_size {
        return Err(Error::InvalidAdversary(format!(
            "{controlled} controlled nodes out of {population_size}"
        )));
    }
    let c = controlled as f64;
    let n = population_size as f64;
    Ok(c * (c - 1.0).max(0.0) / (n * (n - 1.0)))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn pmf(values: &[f64]) -> Pmf {
        Pmf::new(values.iter().enumerate().map(|(i, &p)| (NodeId(i as u32), p)).collect()).unwrap()
    }

    #[test]
    fn entropy_examples() {
        let uniform = Pmf::uniform((0..100).map(NodeId)).unwrap();
        assert_eq!(entropy(&uniform), 100f64.log2());
        assert!((entropy(&uniform) - 6.6438561898).abs() < 1e-9);
        assert_eq!(entropy(&pmf(&[1.0])), 0.0);
        assert_eq!(entropy(&pmf(&[0.5, 0.5])), 1.0);
        assert_eq!(entropy(&pmf(&[0.25, 0.25, 0.5])), 1.5);
        assert_eq!(entropy(&pmf(&[0.5, 0.0, 0.5])), 1.0);
    }

    #[test]
    fn pmf_validation() {
        let near = Pmf::new([(NodeId(0), 0.5), (NodeId(1), 0.5 + 5e-10)].into()).unwrap();
        let total: f64 = near.iter().map(|(_, p)| p).sum();
        assert!((total - 1.0).abs() < 1e-15);
        assert!(Pmf::new([(NodeId(0), 0.5), (NodeId(1), 0.49)].into()).is_err());
        assert!(Pmf::new([(NodeId(0), 1.5), (NodeId(1), -0.5)].into()).is_err());
        assert!(Pmf::new(BTreeMap::new()).is_err());
        assert!(Pmf::from_weights([(NodeId(0), 0.0)]).is_err());
        assert!(Pmf::from_weights([(NodeId(0), -1.0), (NodeId(1), 2.0)]).is_err());
    }

    #[test]
    fn degree_examples() {
        let uniform = Pmf::uniform((0..100).map(NodeId)).unwrap();
        assert_eq!(anonymity_degree(&uniform, 100).unwrap().value, 1.0);
        let partial = Pmf::uniform((0..27).map(NodeId)).unwrap();
        let d = anonymity_degree(&partial, 100).unwrap().value;
        assert!((d - 0.7157).abs() < 5e-5);
        assert_eq!(anonymity_degree(&pmf(&[1.0]), 100).unwrap().value, 0.0);
        assert!(matches!(
            anonymity_degree(&pmf(&[1.0]), 1),
            Err(Error::DegenerateNetwork(1))
        ));
    }

    #[test]
    fn geo_examples() {
        assert!((degree_geo(27, 100).unwrap() - 0.7157).abs() < 5e-5);
        assert_eq!(degree_geo(100, 100).unwrap(), 1.0);
        assert_eq!(degree_geo(1, 100).unwrap(), 0.0);
        assert!(matches!(degree_geo(0, 100), Err(Error::EmptyCountry)));
        assert!(degree_geo(101, 100).is_err());
        assert!(degree_geo(1, 1).is_err());
    }

    #[test]
    fn bw_examples() {
        assert_eq!(degree_bw(&[42.0; 17]).unwrap(), 1.0);
        // Hand evaluation: H({1/4, 1/4, 1/2}) = 1.5 bits, log2(3) = 1.584962500721156.
        let d = degree_bw(&[1.0, 1.0, 2.0]).unwrap();
        assert!((d - 1.5 / 1.584962500721156).abs() < 1e-12);
        assert!((d - 0.94639).abs() < 1e-5);
        assert!(degree_bw(&[1_000_000.0, 1.0, 1.0]).unwrap() < 0.1);
        assert!(matches!(degree_bw(&[1.0, 0.0]), Err(Error::InvalidBandwidth(_))));
        assert!(degree_bw(&[1.0]).is_err());
    }

    #[test]
    fn adversary_examples() {
        let m = AdversaryModel::uniform(10, 100).unwrap();
        assert_eq!(adversary_success(&m), 0.01);
        let m = AdversaryModel::new(vec![0.01; 10]).unwrap();
        assert!((adversary_success(&m) - 0.01).abs() < 1e-15);
        let m = AdversaryModel::new(vec![0.2, 0.3]).unwrap();
        assert!((adversary_success(&m) - 0.25).abs() < 1e-15);
        assert_eq!(adversary_success(&AdversaryModel::new(vec![]).unwrap()), 0.0);
        assert!(AdversaryModel::new(vec![0.7, 0.6]).is_err());
        assert!((adversary_success_without_replacement(10, 100).unwrap() - 90.0 / 9900.0).abs() < 1e-15);
    }

    #[test]
    fn grp_degree_on_small_graphs() {
        let est = LbEstimator::default();
        let d = degree_grp(&WeightedGraph::complete(20), 2, &est).unwrap();
        assert_eq!(d.value, 1.0);
        assert!(!d.estimated);

        let mut g = WeightedGraph::complete(5);
        g.add_vertex(NodeId(5));
        let d = degree_grp(&g, 2, &est).unwrap();
        assert!(d.value < 1.0);

        let d = degree_grp(&WeightedGraph::complete(25), 2, &est).unwrap();
        assert!(d.estimated);
        assert!(d.value > 0.99);

        let empty = WeightedGraph::new((0..4).map(NodeId));
        assert!(matches!(degree_grp(&empty, 2, &est), Err(Error::LbUndefined(2))));
    }

    #[test]
    fn grp_degree_star_four_leaves() {
        // Enumerated by hand: 12 ordered leaf pairs, each path holds the
        // centre and two leaves, so sigma(centre) = 12 and sigma(leaf) = 6.
        let mut g = WeightedGraph::new((0..5).map(NodeId));
        for leaf in 1..5 {
            g.add_edge(NodeId(0), NodeId(leaf), 1.0).unwrap();
        }
        let p_c: f64 = 12.0 / 36.0;
        let p_l: f64 = 6.0 / 36.0;
        let h = -(p_c * p_c.log2()) - 4.0 * p_l * p_l.log2();
        let d = degree_grp(&g, 2, &LbEstimator::default()).unwrap();
        assert!((d.value - h / 5f64.log2()).abs() < 1e-12);
    }
}
