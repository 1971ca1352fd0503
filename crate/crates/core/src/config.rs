//! Run configuration.
//!
//! A single TOML file: the instance-generation keys live at the top level
//! (`n_vehicles`, `data_size_bits.min`, `gain.max`, ...), followed by the
//! optional `[train]`, `[sbb]`, `[split]` and `[experiment]` tables. Missing
//! tables fall back to their defaults; the top-level keys are required.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::harness::ExperimentConfig;
use crate::instance_gen::RangeConfig;
use crate::mtl::TrainConfig;
use crate::solvers::SbbConfig;
use crate::split::SplitConfig;

/// Shipped default configuration.
pub const DEFAULT_CONFIG: &str = include_str!("../config/default.toml");

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Config {
    #[serde(flatten)]
    pub ranges: RangeConfig,
    #[serde(default)]
    pub train: TrainConfig,
    #[serde(default)]
    pub sbb: SbbConfig,
    #[serde(default)]
    pub split: SplitConfig,
    #[serde(default)]
    pub experiment: ExperimentConfig,
}

impl Config {
    pub fn parse(text: &str) -> Result<Self> {
        let cfg: Config = toml::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn shipped() -> Self {
        Config::parse(DEFAULT_CONFIG).expect("shipped config is valid")
    }

    /// Reads a config file, returning the parsed value and its raw text.
    pub fn load(path: &Path) -> Result<(Self, String)> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let cfg =
            Config::parse(&text).map_err(|e| Error::Config(format!("{}: {e}", path.display())))?;
        Ok((cfg, text))
    }

    pub fn validate(&self) -> Result<()> {
        self.ranges.validate()?;
        self.train.validate()?;
        self.sbb.validate()?;
        self.split.scenario(&self.ranges)?;
        self.experiment.validate()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn shipped_ranges_match_defaults() {
        let cfg = Config::shipped();
        assert_eq!(cfg.ranges, RangeConfig::default());
        assert_eq!(cfg.sbb, SbbConfig::default());
        assert_eq!(cfg.train, TrainConfig::default());
        assert_eq!(cfg.experiment, ExperimentConfig::default());
    }

    #[test]
    fn empty_config_is_a_config_error() {
        assert!(matches!(Config::parse(""), Err(Error::Config(_))));
    }

    #[test]
    fn ranges_only_file_gets_default_tables() {
        let text = DEFAULT_CONFIG.split("\n[").next().unwrap();
        let cfg = Config::parse(text).unwrap();
        assert_eq!(cfg.train, TrainConfig::default());
    }

    #[test]
    fn chi_l_alias_accepted() {
        let text = format!(
            "{}\n[train]\nchi_c = 0.0\nchi_l = 2.0\n",
            DEFAULT_CONFIG.split("\n[").next().unwrap()
        );
        let cfg = Config::parse(&text).unwrap();
        assert_eq!(cfg.train.chi_r, 2.0);
    }

    #[test]
    fn inverted_range_rejected() {
        let text = DEFAULT_CONFIG.replace("gain.min = 1e-7", "gain.min = 1e-3");
        assert!(matches!(Config::parse(&text), Err(Error::Config(_))));
    }
}
