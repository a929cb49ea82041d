//! One TOML file configures a run. Every section is optional and unknown
//! keys are rejected.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::analytics::{FloorplanProblem, ResourceModelParams};
use crate::error::{Error, Result};
use crate::hbm::{BandwidthProfile, HbmTopology};
use crate::sort_engine::SortConfig;

/// Hardware throughput figures to compose into the overall number when
/// modeling instead of simulating.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct MeasuredRates {
    pub phase1_gbps: f64,
    pub phase2_gbps: f64,
    pub phase1_passes: u32,
}

impl Default for MeasuredRates {
    fn default() -> Self {
        Self { phase1_gbps: 26.5, phase2_gbps: 38.0, phase1_passes: 6 }
    }
}

/// Sizes covered by `sweep`, in records. Both ends must be powers of two.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SweepConfig {
    pub min_records: u64,
    pub max_records: u64,
    /// Sizes at or below this are sorted for real; larger ones are timed
    /// from the plan alone.
    pub materialize_limit: u64,
}

impl Default for SweepConfig {
    fn default() -> Self {
        Self { min_records: 1 << 22, max_records: 1 << 29, materialize_limit: 0 }
    }
}

impl SweepConfig {
    pub fn sizes(&self) -> Result<Vec<u64>> {
        let (lo, hi) = (self.min_records, self.max_records);
        if !lo.is_power_of_two() || !hi.is_power_of_two() || lo > hi {
            return Err(Error::Config(format!("sweep bounds {lo}..{hi} must be ascending powers of two")));
        }
        Ok((lo.trailing_zeros()..=hi.trailing_zeros()).map(|e| 1u64 << e).collect())
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Config {
    pub sort: SortConfig,
    pub hbm: HbmTopology,
    /// `"MxM,BYTES" = efficiency` entries; empty means the bundled profile.
    pub profile: toml::Table,
    pub resources: ResourceModelParams,
    pub floorplan: FloorplanProblem,
    pub measured: MeasuredRates,
    pub sweep: SweepConfig,
}

impl Config {
    pub fn parse(text: &str) -> Result<Self> {
        let cfg: Config = toml::from_str(text).map_err(|e| Error::Config(e.message().to_owned()))?;
        cfg.sort.validate()?;
        cfg.bandwidth_profile()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::parse(&text).map_err(|e| match e {
            Error::Config(msg) => Error::Config(format!("{}: {msg}", path.display())),
            other => other,
        })
    }

    pub fn bandwidth_profile(&self) -> Result<BandwidthProfile> {
        if self.profile.is_empty() {
            return Ok(BandwidthProfile::default());
        }
        BandwidthProfile::parse(&self.profile.to_string())
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("config is always representable in TOML")
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn empty_file_is_default() {
        assert_eq!(Config::parse("").unwrap(), Config::default());
    }

    #[test]
    fn bundled_desk_config_parses() {
        let c = Config::parse(include_str!("../config/desk.toml")).unwrap();
        assert_eq!(c.hbm.channel_capacity, 1 << 20);
        assert_eq!(c.sweep.sizes().unwrap().len(), 7);
        assert!(c.sort.records <= c.sort.trees as u64 * c.hbm.channel_records());
    }

    #[test]
    fn unknown_keys_fail() {
        assert!(Config::parse("[sort]\nrecordz = 4\n").is_err());
        assert!(Config::parse("[nope]\n").is_err());
        assert!(Config::parse("[hbm]\nchannels = 3\n").is_err());
    }

    #[test]
    fn sections_override_defaults() {
        let cfg = Config::parse(
            "[sort]\nrecords = 1048576\ntuning = false\n[hbm]\nchannel_capacity = 1048576\n[profile]\n\"1x1,1024\" = 0.5\n",
        )
        .unwrap();
        assert_eq!(cfg.sort.records, 1 << 20);
        assert!(!cfg.sort.tuning);
        assert_eq!(cfg.hbm.channel_capacity, 1 << 20);
        let prof = cfg.bandwidth_profile().unwrap();
        assert_eq!(prof.efficiency(crate::hbm::Pattern::ONE, 1024).unwrap(), 0.5);
    }

    #[test]
    fn bad_profile_is_rejected() {
        assert!(Config::parse("[profile]\n\"3x3,1024\" = 0.5\n").is_err());
    }

    #[test]
    fn round_trips_through_toml() {
        let cfg = Config::default();
        assert_eq!(Config::parse(&cfg.to_toml()).unwrap(), cfg);
    }

    #[test]
    fn sweep_sizes() {
        let s = SweepConfig { min_records: 1 << 14, max_records: 1 << 16, materialize_limit: 0 };
        assert_eq!(s.sizes().unwrap(), vec![1 << 14, 1 << 15, 1 << 16]);
        assert!(SweepConfig { min_records: 3, ..s }.sizes().is_err());
    }
}
