//! Flat key-value run configuration.
//!
//! ```toml
//! alpha = 1e-4
//! k = 32
//! region = "annulus"
//! annulus_scale = 1.5
//! filter = "wiener"
//! wiener_noise_var = "auto"
//! ```
//!
//! Every key is optional and unknown keys are rejected.

use std::path::Path;

use activecircle::filters::{FilterKind, FilterSpec, NoiseVariance};
use activecircle::{EngineConfig, Functional, RegionMode};
use serde::{Deserialize, Serialize};

use crate::error::{CliError, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct RunConfig {
    pub engine: EngineConfig,
    pub filter: FilterSpec,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            engine: EngineConfig::default(),
            filter: FilterSpec::default(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Deserialize, Serialize)]
#[serde(untagged)]
pub enum NoiseSetting {
    Fixed(f64),
    Named(AutoTag),
}

#[derive(Debug, Clone, Copy, PartialEq, Deserialize, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum AutoTag {
    Auto,
}

/// Overrides as they appear in a config file or an HTTP request body.
#[derive(Debug, Clone, Default, PartialEq, Deserialize, Serialize)]
#[serde(deny_unknown_fields)]
pub struct ConfigOverrides {
    pub alpha: Option<f64>,
    #[serde(alias = "samples")]
    pub k: Option<usize>,
    pub init_radius: Option<f64>,
    pub max_iterations: Option<usize>,
    pub convergence_force: Option<f64>,
    pub min_radius: Option<f64>,
    pub intensity_scale: Option<f64>,
    pub region: Option<RegionMode>,
    pub annulus_scale: Option<f64>,
    pub functional: Option<Functional>,
    pub filter: Option<FilterKind>,
    pub filter_window: Option<usize>,
    pub bilateral_sigma_space: Option<f64>,
    pub bilateral_sigma_range: Option<f64>,
    pub wiener_noise_var: Option<NoiseSetting>,
}

impl ConfigOverrides {
    pub fn parse(text: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| CliError::Config(e.message().to_string()))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
        Self::parse(&text).map_err(|e| CliError::Config(format!("{}: {e}", path.display())))
    }

    /// Applies the set keys on top of `base` and validates the result.
    pub fn apply(&self, base: RunConfig) -> Result<RunConfig> {
        let mut engine = base.engine;
        let mut filter = base.filter;
        macro_rules! set {
            ($src:expr => $dst:expr) => {
                if let Some(v) = $src {
                    $dst = v;
                }
            };
        }
        set!(self.alpha => engine.alpha);
        set!(self.k => engine.samples);
        set!(self.init_radius => engine.init_radius);
        set!(self.max_iterations => engine.max_iterations);
        set!(self.convergence_force => engine.convergence_force);
        set!(self.min_radius => engine.min_radius);
        set!(self.intensity_scale => engine.intensity_scale);
        set!(self.region => engine.region_policy.mode);
        set!(self.annulus_scale => engine.region_policy.annulus_scale);
        set!(self.functional => engine.functional);
        set!(self.filter => filter.kind);
        set!(self.filter_window => filter.window);
        set!(self.bilateral_sigma_space => filter.bilateral_sigma_space);
        set!(self.bilateral_sigma_range => filter.bilateral_sigma_range);
        if let Some(noise) = self.wiener_noise_var {
            filter.wiener_noise_var = match noise {
                NoiseSetting::Fixed(v) => NoiseVariance::Fixed(v),
                NoiseSetting::Named(AutoTag::Auto) => NoiseVariance::Auto,
            };
        }
        engine.validate()?;
        filter.validate()?;
        Ok(RunConfig { engine, filter })
    }
}
