//! Pipeline settings, loadable from TOML.
//!
//! ```toml
//! seed = 7
//! scheme = "hierarchical"
//! krylov_epsilon = 0.1
//!
//! [layers]
//! max_iters = 500
//!
//! [fdl]
//! n = 30
//! lambda = 1e-4
//!
//! [fdl.calibration]
//! max_iters_per_stage = 20
//! ```

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::codec::HevcCommands;
use crate::error::{Error, Result};
use crate::fdl::FdlConfig;
use crate::layers::LayerOptConfig;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Scheme {
    /// Subset 1 as low-rank layers, Subset 2 predicted with FDL.
    Hierarchical,
    /// Both subsets as low-rank layers, no prediction.
    LayersOnly,
    /// Original views of Subset 1 coded directly, Subset 2 predicted with
    /// FDL. The anchor for rate comparisons.
    ViewAnchor,
}

impl Scheme {
    pub fn label(self) -> &'static str {
        match self {
            Scheme::Hierarchical => "hierarchical",
            Scheme::LayersOnly => "layers-only",
            Scheme::ViewAnchor => "view-anchor",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SweepConfig {
    /// Calibration iterations per stage once warm-started from the previous cell.
    pub warm_calibration_iters: usize,
    /// Views displayed per second, for kbps figures.
    pub views_per_second: f64,
}

impl Default for SweepConfig {
    fn default() -> Self {
        Self { warm_calibration_iters: 8, views_per_second: 30.0 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct PipelineConfig {
    pub seed: u64,
    pub scheme: Scheme,
    pub krylov_epsilon: f64,
    pub layers: LayerOptConfig,
    pub fdl: FdlConfig,
    pub sweep: SweepConfig,
    pub hevc: Option<HevcCommands>,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        Self {
            seed: 0,
            scheme: Scheme::Hierarchical,
            krylov_epsilon: 0.1,
            layers: LayerOptConfig::default(),
            fdl: FdlConfig::default(),
            sweep: SweepConfig::default(),
            hevc: None,
        }
    }
}

impl PipelineConfig {
    pub fn from_toml(text: &str) -> Result<Self> {
        let cfg: Self = toml::from_str(text).map_err(|e| Error::InvalidConfig(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::from_toml(&std::fs::read_to_string(path)?)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.krylov_epsilon > 0.0 && self.krylov_epsilon < 1.0) {
            return Err(Error::InvalidConfig(format!("krylov_epsilon must lie in (0, 1), got {}", self.krylov_epsilon)));
        }
        self.layers.validate()?;
        self.fdl.validate()
    }

    pub fn with_seed(mut self, seed: u64) -> Self {
        self.seed = seed;
        self.layers.seed = seed;
        self
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn partial_toml_overrides_defaults() {
        let cfg = PipelineConfig::from_toml("seed = 3\n[fdl]\nn = 12\nlambda = 0.01\n[layers]\nmax_iters = 50\n").unwrap();
        assert_eq!(cfg.seed, 3);
        assert_eq!(cfg.fdl.n, 12);
        assert_eq!(cfg.fdl.lambda, 0.01);
        assert_eq!(cfg.layers.max_iters, 50);
        assert_eq!(cfg.layers.step_size, LayerOptConfig::default().step_size);
        assert_eq!(cfg.fdl.calibration, Default::default());
    }

    #[test]
    fn rejects_bad_values() {
        assert!(PipelineConfig::from_toml("[fdl]\nn = 0\n").is_err());
        assert!(PipelineConfig::from_toml("krylov_epsilon = 2.0\n").is_err());
        assert!(PipelineConfig::from_toml("unknown_key = [").is_err());
    }
}
