use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::agent::{TrainingConfig, Variant};
use crate::env::{NetworkConfig, StimConfig};
use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct CalibrationConfig {
    /// Seeds `0..seeds` are checked in both modes.
    pub seeds: u64,
    /// Unstimulated run length before reading the biomarker (ms).
    pub duration_ms: f64,
    pub threshold: f64,
    /// Largest accepted one-sided Mann-Whitney p for parkinsonian > healthy.
    pub max_separation_p: f64,
}

impl Default for CalibrationConfig {
    fn default() -> Self {
        Self {
            seeds: 10,
            duration_ms: 256.0,
            threshold: 0.35,
            max_separation_p: 0.01,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct EvalConfig {
    /// Steps per evaluation rollout.
    pub rollout_steps: usize,
    /// Rollouts per checkpoint; rollout `k` uses the same environment seeds
    /// for every checkpoint.
    pub rollouts: usize,
    /// Seed-change intervals for the seed-shift protocol.
    pub intervals: Vec<usize>,
    pub carrier_freqs: Vec<f64>,
    /// Base of the evaluation environment seeds, kept apart from training.
    pub seed: u64,
}

impl Default for EvalConfig {
    fn default() -> Self {
        Self {
            rollout_steps: 150,
            rollouts: 2,
            intervals: vec![10, 20, 50, 75],
            carrier_freqs: vec![50.0, 30.0],
            seed: 0x5eed_0e7a1,
        }
    }
}

impl EvalConfig {
    pub fn validate(&self) -> Result<()> {
        if self.rollout_steps == 0 || self.rollouts == 0 {
            return Err(Error::Config(
                "rollout_steps and rollouts must be positive".into(),
            ));
        }
        if self.intervals.contains(&0) {
            return Err(Error::Config("seed-change interval must be positive".into()));
        }
        Ok(())
    }
}

/// Everything needed to reproduce an experiment.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ExperimentConfig {
    pub id: String,
    pub network: NetworkConfig,
    pub stim: StimConfig,
    pub training: TrainingConfig,
    pub eval: EvalConfig,
    pub calibration: CalibrationConfig,
    pub variant: Variant,
    /// Training seeds.
    pub seeds: Vec<u64>,
    pub out_dir: PathBuf,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            id: "default".into(),
            network: NetworkConfig::default(),
            stim: StimConfig::default(),
            training: TrainingConfig::default(),
            eval: EvalConfig::default(),
            calibration: CalibrationConfig::default(),
            variant: Variant::SeaDbs,
            seeds: (0..5).collect(),
            out_dir: PathBuf::from("out"),
        }
    }
}

impl ExperimentConfig {
    pub fn from_toml_str(s: &str) -> Result<Self> {
        let cfg: Self = toml::from_str(s).map_err(|e| Error::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_toml_str(&text)
    }

    pub fn validate(&self) -> Result<()> {
        self.network.validate()?;
        self.stim.validate()?;
        self.training.validate()?;
        self.training.episode.validate(&self.network)?;
        self.eval.validate()?;
        if self.seeds.is_empty() {
            return Err(Error::Config("at least one training seed is required".into()));
        }
        Ok(())
    }
}
