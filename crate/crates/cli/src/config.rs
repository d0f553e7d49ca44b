use std::path::Path;

use anyhow::{Context, Result};
use serde::{Deserialize, Serialize};
use ulcerbench_core::losses::LossParams;
use ulcerbench_core::metrics::MatchConfig;
use ulcerbench_core::postprocess::DetectConfig;
use ulcerbench_core::preprocess::{AugmentConfig, NormConfig};
use ulcerbench_service::DEFAULT_MAX_BODY_BYTES;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ServiceSettings {
    pub host: std::net::IpAddr,
    pub port: u16,
    pub max_body_bytes: usize,
}

impl Default for ServiceSettings {
    fn default() -> Self {
        Self {
            host: std::net::Ipv4Addr::LOCALHOST.into(),
            port: 8080,
            max_body_bytes: DEFAULT_MAX_BODY_BYTES,
        }
    }
}

/// Every tunable of every subcommand; read from TOML, then overridden by
/// flags, then validated as a whole.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub detect: DetectConfig,
    pub matching: MatchConfig,
    pub loss: LossParams,
    pub normalize: NormConfig,
    pub augment: AugmentConfig,
    pub service: ServiceSettings,
}

impl RunConfig {
    pub fn load(path: Option<&Path>) -> Result<Self> {
        let Some(path) = path else {
            return Ok(Self::default());
        };
        let text = std::fs::read_to_string(path).with_context(|| format!("reading config {}", path.display()))?;
        toml::from_str(&text).with_context(|| format!("parsing config {}", path.display()))
    }

    pub fn validate(&self) -> Result<()> {
        self.detect.validate().context("[detect]")?;
        self.matching.validate().context("[matching]")?;
        self.loss.validate().context("[loss]")?;
        self.normalize.validate().context("[normalize]")?;
        self.augment.validate().context("[augment]")?;
        if self.service.max_body_bytes == 0 {
            anyhow::bail!("[service]: max_body_bytes must be >= 1");
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_round_trip_through_toml() {
        let cfg = RunConfig::default();
        let text = toml::to_string(&cfg).unwrap();
        assert_eq!(toml::from_str::<RunConfig>(&text).unwrap(), cfg);
        cfg.validate().unwrap();
    }

    #[test]
    fn partial_files_fill_in_defaults() {
        let cfg: RunConfig =
            toml::from_str("[detect]\nmin_area = 50\n\n[matching]\nap_interpolation = \"eleven-point\"\n").unwrap();
        assert_eq!(cfg.detect.min_area, 50);
        assert_eq!(cfg.detect.min_mean_confidence, 0.6);
        assert_eq!(cfg.matching.iou_threshold, 0.5);
    }

    #[test]
    fn unknown_keys_and_bad_values_are_rejected() {
        assert!(toml::from_str::<RunConfig>("[detect]\nmin_areaa = 5\n").is_err());
        let cfg: RunConfig = toml::from_str("[detect]\nmin_mean_confidence = 1.5\n").unwrap();
        assert!(cfg.validate().is_err());
    }

    #[test]
    fn readme_example_is_valid() {
        let readme = include_str!("../../../README.md");
        let block = readme
            .split("```toml\n")
            .nth(1)
            .and_then(|rest| rest.split("```").next())
            .expect("README has a TOML example");
        let cfg: RunConfig = toml::from_str(block).unwrap();
        cfg.validate().unwrap();
        assert_eq!(cfg, RunConfig::default());
    }
}
