//! Experiment configuration file.
//!
//! A TOML file with one table per stage. Every key is optional; missing keys
//! take the library defaults and command-line flags override both.
//!
//! ```toml
//! seed = 7
//! threads = 4
//!
//! [scene]
//! kind = "urban"          # or "street"
//! [scene.urban]
//! grid_x = 4
//! scatterers_per_street = 4
//!
//! [routes]
//! routes = 16
//! windows_per_route = 2
//!
//! [trace]
//! max_reflection_order = 2
//! min_power_dbm = -150.0
//!
//! [cluster]
//! mode = "object"
//! slots = 10
//!
//! [dataset]
//! scales = [2, 4, 8, 16]
//! normalize = true
//!
//! [train]
//! epochs = 80
//! learning_rate = 1e-5
//! batch_size = 32
//! max_hidden = 512
//!
//! [eval]
//! include_gap_filled = false
//! location_ame = "axis-mean"
//!
//! [ablate]
//! max_hidden = [32, 128, 512]
//! residual_off = true
//!
//! [cir]
//! delay_tol_ns = 10.0
//! power_tol_db = 3.0
//! ```

use std::path::Path;

use chansr::clustering::{ClusterMode, SegmentConfig};
use chansr::metrics::MetricOptions;
use chansr::mll::{Activation, AdamConfig, TrainConfig};
use chansr::pipeline::SceneConfig;
use chansr::raytracer::TraceLimits;
use chansr::scene::{RoutePlanConfig, StreetConfig, UrbanConfig};
use chansr::{Error, Result};
use serde::Deserialize;

#[derive(Debug, Clone, PartialEq, Deserialize, Default)]
#[serde(default, deny_unknown_fields)]
pub struct Config {
    pub seed: Option<u64>,
    pub threads: Option<usize>,
    pub scene: SceneSection,
    pub routes: RoutePlanConfig,
    pub trace: TraceLimits,
    pub cluster: ClusterSection,
    pub dataset: DatasetSection,
    pub train: TrainSection,
    pub eval: MetricOptions,
    pub ablate: AblateSection,
    pub cir: CirSection,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Deserialize, Default, clap::ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum SceneKind {
    #[default]
    Urban,
    Street,
}

#[derive(Debug, Clone, PartialEq, Deserialize, Default)]
#[serde(default, deny_unknown_fields)]
pub struct SceneSection {
    pub kind: SceneKind,
    pub urban: UrbanConfig,
    pub street: StreetConfig,
}

impl SceneSection {
    pub fn resolve(&self, kind: Option<SceneKind>) -> SceneConfig {
        match kind.unwrap_or(self.kind) {
            SceneKind::Urban => SceneConfig::Urban(self.urban.clone()),
            SceneKind::Street => SceneConfig::Street(self.street.clone()),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Deserialize, Default)]
#[serde(default, deny_unknown_fields)]
pub struct ClusterSection {
    pub mode: ClusterMode,
    #[serde(flatten)]
    pub segment: SegmentConfig,
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DatasetSection {
    pub scales: Vec<u32>,
    pub normalize: bool,
}

impl Default for DatasetSection {
    fn default() -> Self {
        Self {
            scales: vec![2, 4, 8, 16],
            normalize: true,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrainSection {
    pub epochs: usize,
    pub batch_size: usize,
    pub learning_rate: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub epsilon: f64,
    pub max_hidden: usize,
    pub residual: bool,
    pub activation: Activation,
}

impl Default for TrainSection {
    fn default() -> Self {
        let t = TrainConfig::default();
        Self {
            epochs: t.epochs,
            batch_size: t.batch_size,
            learning_rate: t.adam.learning_rate,
            beta1: t.adam.beta1,
            beta2: t.adam.beta2,
            epsilon: t.adam.epsilon,
            max_hidden: 512,
            residual: true,
            activation: Activation::Relu,
        }
    }
}

impl TrainSection {
    pub fn train_config(&self, seed: u64) -> TrainConfig {
        TrainConfig {
            epochs: self.epochs,
            batch_size: self.batch_size,
            adam: AdamConfig {
                learning_rate: self.learning_rate,
                beta1: self.beta1,
                beta2: self.beta2,
                epsilon: self.epsilon,
            },
            seed,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct AblateSection {
    pub max_hidden: Vec<usize>,
    /// Append a 512-wide variant without residual summation.
    pub residual_off: bool,
}

impl Default for AblateSection {
    fn default() -> Self {
        Self {
            max_hidden: vec![32, 64, 128, 256, 512, 1024],
            residual_off: true,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CirSection {
    pub delay_tol_ns: f64,
    pub power_tol_db: f64,
}

impl Default for CirSection {
    fn default() -> Self {
        Self {
            delay_tol_ns: chansr::cir::DEFAULT_DELAY_TOL * 1e9,
            power_tol_db: chansr::cir::DEFAULT_POWER_TOL,
        }
    }
}

impl Config {
    pub fn load(path: Option<&Path>) -> Result<Self> {
        let Some(path) = path else {
            return Ok(Self::default());
        };
        let text = std::fs::read_to_string(path).map_err(|source| Error::Read {
            stage: "config",
            path: path.to_path_buf(),
            source,
        })?;
        Self::parse(&text).map_err(|e| Error::InvalidConfig(format!("{}: {e}", path.display())))
    }

    pub fn parse(text: &str) -> std::result::Result<Self, toml::de::Error> {
        toml::from_str(text)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn empty_file_gives_defaults() {
        assert_eq!(Config::parse("").unwrap(), Config::default());
    }

    #[test]
    fn sections_override_defaults() {
        let c = Config::parse(
            r#"
            seed = 3
            [scene]
            kind = "street"
            [scene.street]
            length = 300.0
            [cluster]
            slots = 4
            mode = "facet"
            [train]
            epochs = 5
            "#,
        )
        .unwrap();
        assert_eq!(c.seed, Some(3));
        assert!(matches!(c.scene.resolve(None), SceneConfig::Street(s) if s.length == 300.0));
        assert_eq!(c.cluster.segment.slots, 4);
        assert_eq!(c.cluster.mode, ClusterMode::Facet);
        assert_eq!(c.train.epochs, 5);
        assert_eq!(c.train.learning_rate, 1e-5);
    }

    #[test]
    fn unknown_keys_rejected() {
        assert!(Config::parse("[train]\nepoch = 3").is_err());
    }
}
