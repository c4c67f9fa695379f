// SPDX-License-Identifier: Apache-2.0

use std::path::PathBuf;

use crate::model::NodeId;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("invalid pmf: {0}")]
    InvalidPmf(String),
    #[error("degenerate network: population size {0} < 2")]
    DegenerateNetwork(usize),
    #[error("empty country: no nodes in the selected country")]
    EmptyCountry,
    #[error("country count {country} exceeds population size {population}")]
    CountryLargerThanPopulation { country: usize, population: usize },
    #[error("invalid bandwidth {0}: must be finite and > 0")]
    InvalidBandwidth(f64),
    #[error("invalid adversary model: {0}")]
    InvalidAdversary(String),
    #[error("LB undefined: no path of length {0} exists in the graph")]
    LbUndefined(usize),
    #[error(
        "instance too large for exact enumeration ({vertices} vertices, length {length}); use the sampled estimator"
    )]
    InstanceTooLarge { vertices: usize, length: usize },
    #[error("zero elapsed time: t_q equals t_0")]
    ZeroElapsedTime,
    #[error("time regression: {requested} is earlier than {current}")]
    TimeRegression { requested: u64, current: u64 },
    #[error("invalid timestamps: t0={t0}, tp={tp}, tq={tq}")]
    InvalidTimestamps { t0: u64, tp: u64, tq: u64 },
    #[error("unknown vertex {0}")]
    UnknownVertex(NodeId),
    #[error("self edge on vertex {0}")]
    SelfEdge(NodeId),
    #[error("invalid edge weight {0}: must be finite and >= 0")]
    InvalidWeight(f64),
    #[error("client {0} is not a graph vertex")]
    ClientNotInVertices(NodeId),
    #[error("client {0} must not be a candidate relay")]
    ClientAmongRelays(NodeId),
    #[error("need at least {needed} vertices, got {got}")]
    TooFewVertices { needed: usize, got: usize },
    #[error("insufficient nodes: need {needed}, have {available}")]
    InsufficientNodes { needed: usize, available: usize },
    #[error("country {country} too small: need {needed} nodes, have {available}")]
    CountryTooSmall {
        country: String,
        needed: usize,
        available: usize,
    },
    #[error("invalid circuit: {0}")]
    InvalidCircuit(String),
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
    #[error("invalid population spec: {0}")]
    InvalidPopulation(String),
    #[error("probe endpoints must differ (got {0} twice)")]
    SelfProbe(NodeId),
    #[error("arithmetic overflow evaluating {0}")]
    Overflow(&'static str),
    #[error("invalid snapshot: {0}")]
    InvalidSnapshot(String),
    #[error("config error: {0}")]
    Config(String),
    #[error("parse error: {0}")]
    Parse(String),
    #[error("i/o error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error(transparent)]
    Json(#[from] serde_json::Error),
    #[error(transparent)]
    Csv(#[from] csv::Error),
}

impl Error {
    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}
