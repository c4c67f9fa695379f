// SPDX-License-Identifier: Apache-2.0

//! Simulation config: population, latency model, transfer model and the
//! experiment plan, read from TOML or JSON.
//!
//! ```toml
//! [population]
//! total = 3
//! cluster_count = 1
//! [population.countries]
//! US = 2
//! DE = 1
//! [population.bandwidth]
//! kind = "file"          # or "lognormal" with size, median_kbps, sigma, seed
//! path = "bandwidths.txt"
//!
//! [latency]
//! intra_ms = 20.0
//! inter_ms = 150.0
//! jitter_ms = 10.0
//! down_prob = 0.02
//!
//! [transfer]
//! handshake_per_link = 4.0
//! processing_ms = 25.0
//!
//! [experiment]
//! # see ExperimentPlan; every key has a default
//! ```

use std::path::{Path, PathBuf};

use indexmap::IndexMap;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::experiment::ExperimentPlan;
use crate::simnet::{lognormal_bandwidths, parse_bandwidth_sample, LatencyModel, PopulationSpec, TransferModel};

/// The bundled default: the 100-node population with its country split.
pub const DEFAULT_CONFIG: &str = include_str!("../data/default.toml");

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Config {
    pub population: PopulationConfig,
    #[serde(default)]
    pub latency: LatencyModel,
    #[serde(default)]
    pub transfer: TransferModel,
    #[serde(default)]
    pub experiment: ExperimentPlan,
    /// Directory that relative paths in the config resolve against.
    #[serde(skip)]
    pub base_dir: Option<PathBuf>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PopulationConfig {
    pub total: usize,
    pub countries: IndexMap<String, usize>,
    #[serde(default = "default_cluster_count")]
    pub cluster_count: usize,
    pub bandwidth: BandwidthSource,
}

fn default_cluster_count() -> usize {
    100
}

/// Where the bandwidth sample clustered by k-means comes from.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase", deny_unknown_fields)]
pub enum BandwidthSource {
    Lognormal {
        size: usize,
        median_kbps: f64,
        sigma: f64,
        seed: u64,
    },
    /// One value per line in KB/s.
    File { path: PathBuf },
}

impl Config {
    pub fn default_config() -> Self {
        Config::from_toml_str(DEFAULT_CONFIG).expect("bundled config is valid")
    }

    pub fn from_toml_str(text: &str) -> Result<Self> {
        let config: Config = toml::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        config.validate()?;
        Ok(config)
    }

    pub fn from_json_str(text: &str) -> Result<Self> {
        let config: Config = serde_json::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        config.validate()?;
        Ok(config)
    }

    /// Reads a `.json` file as JSON and anything else as TOML.
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let mut config = match path.extension().and_then(|e| e.to_str()) {
            Some("json") => Config::from_json_str(&text)?,
            _ => Config::from_toml_str(&text)?,
        };
        config.base_dir = path.parent().map(Path::to_path_buf);
        Ok(config)
    }

    pub fn to_toml_string(&self) -> Result<String> {
        toml::to_string(self).map_err(|e| Error::Config(e.to_string()))
    }

    /// Checks everything that does not need the bandwidth file.
    pub fn validate(&self) -> Result<()> {
        let p = &self.population;
        let sum: usize = p.countries.values().sum();
        if sum != p.total {
            return Err(Error::Config(format!(
                "population.countries add up to {sum}, population.total is {}",
                p.total
            )));
        }
        if p.cluster_count == 0 {
            return Err(Error::Config("population.cluster_count must be >= 1".into()));
        }
        if let BandwidthSource::Lognormal {
            size,
            median_kbps,
            sigma,
            ..
        } = p.bandwidth
        {
            if size < p.cluster_count {
                return Err(Error::Config(format!(
                    "bandwidth sample of {size} values for {} clusters",
                    p.cluster_count
                )));
            }
            if !(median_kbps > 0.0 && median_kbps.is_finite() && sigma >= 0.0 && sigma.is_finite()) {
                return Err(Error::Config("log-normal bandwidth parameters out of range".into()));
            }
        }
        self.latency.validate()?;
        for v in [
            self.transfer.handshake_per_link,
            self.transfer.processing_ms,
            self.transfer.page_kb,
        ] {
            if !(v.is_finite() && v >= 0.0) {
                return Err(Error::Config("transfer parameters must be finite and >= 0".into()));
            }
        }
        self.experiment.validate()?;
        if !p.countries.contains_key(&self.experiment.home_country) {
            return Err(Error::Config(format!(
                "home country {:?} has no nodes",
                self.experiment.home_country
            )));
        }
        Ok(())
    }

    pub fn bandwidth_sample(&self) -> Result<Vec<f64>> {
        match &self.population.bandwidth {
            BandwidthSource::Lognormal {
                size,
                median_kbps,
                sigma,
                seed,
            } => lognormal_bandwidths(*size, *median_kbps, *sigma, *seed),
            BandwidthSource::File { path } => {
                let path = match &self.base_dir {
                    Some(dir) if path.is_relative() => dir.join(path),
                    _ => path.clone(),
                };
                let text = std::fs::read_to_string(&path).map_err(|e| Error::io(&path, e))?;
                parse_bandwidth_sample(&text)
            }
        }
    }

    pub fn population_spec(&self) -> Result<PopulationSpec> {
        let spec = PopulationSpec {
            country_counts: self.population.countries.clone(),
            total: self.population.total,
            bandwidth_sample: self.bandwidth_sample()?,
            cluster_count: self.population.cluster_count,
        };
        spec.validate()?;
        Ok(spec)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn bundled_default() {
        let c = Config::default_config();
        assert_eq!(c.population.total, 100);
        assert_eq!(c.population.countries["US"], 27);
        assert_eq!(c.population.countries["Others"], 15);
        assert_eq!(c.population.countries.len(), 19);
        let spec = c.population_spec().unwrap();
        assert_eq!(spec.bandwidth_sample.len(), 3071);
    }

    #[test]
    fn toml_round_trip_and_json() {
        let c = Config::default_config();
        let again = Config::from_toml_str(&c.to_toml_string().unwrap()).unwrap();
        assert_eq!(c, again);
        let json = serde_json::to_string(&c).unwrap();
        assert_eq!(Config::from_json_str(&json).unwrap(), c);
    }

    #[test]
    fn rejects_inconsistent_counts_and_unknown_keys() {
        let bad = DEFAULT_CONFIG.replace("total = 100", "total = 99");
        assert!(matches!(Config::from_toml_str(&bad), Err(Error::Config(_))));
        let bad = DEFAULT_CONFIG.replace("intra_ms = 20.0", "intra_ms = 20.0\nbogus = 1");
        assert!(Config::from_toml_str(&bad).is_err());
        let bad = DEFAULT_CONFIG.replace("home_country = \"US\"", "home_country = \"BR\"");
        assert!(Config::from_toml_str(&bad).is_err());
    }

    #[test]
    fn bandwidth_file_relative_to_config() {
        let dir = tempfile::tempdir().unwrap();
        std::fs::write(dir.path().join("bw.txt"), "100\n200\n300\n").unwrap();
        let text = r#"
[population]
total = 3
cluster_count = 2
countries = { US = 2, DE = 1 }
bandwidth = { kind = "file", path = "bw.txt" }
"#;
        let path = dir.path().join("sim.toml");
        std::fs::write(&path, text).unwrap();
        let c = Config::load(&path).unwrap();
        assert_eq!(c.bandwidth_sample().unwrap(), vec![100.0, 200.0, 300.0]);
        assert_eq!(c.experiment, ExperimentPlan::default());
    }
}
