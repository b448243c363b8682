//! The run configuration file: one TOML document with a section per module.

use std::path::{Path, PathBuf};

use heatflux::datagen::GenConfig;
use heatflux::evaluation::CompareConfig;
use heatflux::model::Precision;
use heatflux::processing::PipelineConfig;
use heatflux::trainer::TrainConfig;
use heatflux::vnet::VNetConfig;
use heatflux::{Error, Result};
use serde::{Deserialize, Serialize};

/// Counts and sweeps of the evaluation suites.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EvalConfig {
    pub seed: u64,
    /// Comparison runs (the original study used 200).
    pub comparison_runs: usize,
    pub eps_range: [f64; 2],
    pub stability_runs: usize,
    pub stability_sigmas: Vec<f64>,
    pub stability_t: f64,
    pub smoothing_sigmas: Vec<f64>,
    pub resolution_targets: Vec<usize>,
    pub discontinuity_runs: usize,
    /// Kinetic runs of the simulation-time error study.
    pub time_runs: usize,
    pub time_t_end: f64,
    pub time_record_dt: f64,
    /// Number of ε-classes in comparison summaries.
    pub eps_classes: usize,
    pub precision: Precision,
}

impl Default for EvalConfig {
    fn default() -> Self {
        EvalConfig {
            seed: 1,
            comparison_runs: 20,
            eps_range: [0.01, 1.0],
            stability_runs: 10,
            stability_sigmas: vec![0.0, 0.02, 0.04, 0.06, 0.1],
            stability_t: 3.0,
            smoothing_sigmas: vec![0.0, 0.02, 0.04, 0.06, 0.08, 0.1, 0.15, 0.2],
            resolution_targets: vec![1024, 768, 512],
            discontinuity_runs: 10,
            time_runs: 5,
            time_t_end: 8.0,
            time_record_dt: 0.25,
            eps_classes: 20,
            precision: Precision::F64,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub output_dir: PathBuf,
    pub gen: GenConfig,
    pub pipeline: PipelineConfig,
    pub vnet: VNetConfig,
    pub train: TrainConfig,
    pub compare: CompareConfig,
    pub eval: EvalConfig,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            output_dir: PathBuf::from("heatflux-out"),
            gen: GenConfig::default(),
            pipeline: PipelineConfig::default(),
            vnet: VNetConfig::default(),
            train: TrainConfig::default(),
            compare: CompareConfig::default(),
            eval: EvalConfig::default(),
        }
    }
}

impl RunConfig {
    pub fn from_toml(text: &str) -> Result<Self> {
        let cfg: RunConfig = toml::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        Self::from_toml(&text)
    }

    pub fn to_toml(&self) -> Result<String> {
        toml::to_string(self).map_err(|e| Error::Format(e.to_string()))
    }

    pub fn validate(&self) -> Result<()> {
        self.gen.validate()?;
        self.pipeline.validate()?;
        self.vnet.validate()?;
        self.train.validate()?;
        if self.vnet.window != self.pipeline.window_size {
            return Err(Error::Config(format!(
                "vnet.window ({}) must equal pipeline.window_size ({})",
                self.vnet.window, self.pipeline.window_size
            )));
        }
        let e = &self.eval;
        if !(e.eps_range[0] > 0.0 && e.eps_range[0] <= e.eps_range[1]) {
            return Err(Error::Config("eval.eps_range must be positive and ordered".into()));
        }
        if e.stability_sigmas.iter().chain(&e.smoothing_sigmas).any(|s| !(*s >= 0.0)) {
            return Err(Error::Config("smoothing widths must be non-negative".into()));
        }
        if e.resolution_targets.iter().any(|&n| n < 4) || e.eps_classes == 0 {
            return Err(Error::Config("resolution targets must be >= 4 and eps_classes >= 1".into()));
        }
        if !(self.compare.t_end > 0.0 && self.compare.record_dt > 0.0 && e.stability_t > 0.0) {
            return Err(Error::Config("simulation times must be positive".into()));
        }
        Ok(())
    }

    /// Sets every seed.
    pub fn set_seed(&mut self, seed: u64) {
        self.gen.seed = seed;
        self.train.seed = seed;
        self.eval.seed = seed;
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_round_trip() {
        let c = RunConfig::default();
        c.validate().unwrap();
        let text = c.to_toml().unwrap();
        assert_eq!(RunConfig::from_toml(&text).unwrap(), c);
        assert_eq!(RunConfig::from_toml("").unwrap(), c);
    }

    #[test]
    fn partial_and_invalid_files() {
        let c = RunConfig::from_toml("[gen]\nn_eps = 3\n[train]\nseed = 5\n").unwrap();
        assert_eq!(c.gen.n_eps, 3);
        assert_eq!(c.gen.nx, 1024);
        assert_eq!(c.train.seed, 5);
        assert!(RunConfig::from_toml("[gen]\nn_epss = 3\n").is_err());
        assert!(RunConfig::from_toml("bogus = 1\n").is_err());
        assert!(RunConfig::from_toml("[vnet]\nwindow = 256\n").is_err());
        assert!(RunConfig::from_toml("[vnet]\nkernel = 4\n").is_err());
    }
}
