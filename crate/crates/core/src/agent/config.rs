use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use super::policy::AnnealSchedule;
use crate::env::{EpisodeConfig, Mode};
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Variant {
    Baseline,
    BaselinePm,
    BaselineGs,
    SeaDbs,
}

impl Variant {
    pub const ALL: [Variant; 4] = [
        Variant::Baseline,
        Variant::BaselinePm,
        Variant::BaselineGs,
        Variant::SeaDbs,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Variant::Baseline => "baseline",
            Variant::BaselinePm => "baseline_pm",
            Variant::BaselineGs => "baseline_gs",
            Variant::SeaDbs => "sea_dbs",
        }
    }

    pub fn predictive(self) -> bool {
        matches!(self, Variant::BaselinePm | Variant::SeaDbs)
    }

    pub fn gumbel(self) -> bool {
        matches!(self, Variant::BaselineGs | Variant::SeaDbs)
    }
}

impl fmt::Display for Variant {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Variant {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Variant::ALL.into_iter().find(|v| v.name() == s).ok_or_else(|| {
            Error::Config(format!(
                "unknown variant `{s}` (expected baseline, baseline_pm, baseline_gs or sea_dbs)"
            ))
        })
    }
}

/// How the predicted reward enters the critic target.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PredictedReward {
    /// `r + r̂ + γ Q'`
    Additive,
    /// `r̂ + γ Q'`, observed reward dropped.
    Substitute,
}

/// What the annealing index counts.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AnnealClock {
    EnvStep,
    Episode,
}

/// Which learning components are active.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Components {
    pub predictive: bool,
    pub gumbel: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TrainingConfig {
    pub mode: Mode,
    pub episodes: usize,
    pub steps_per_episode: usize,
    pub gamma: f64,
    /// Soft target-update coefficient.
    pub rho: f64,
    pub beta_threshold: f64,
    pub reward_scale: f64,
    pub actor_lr: f64,
    pub critic_lr: f64,
    pub predictor_lr: f64,
    pub batch_size: usize,
    pub replay_capacity: usize,
    pub hidden: Vec<usize>,
    pub temperature: AnnealSchedule,
    pub epsilon: AnnealSchedule,
    pub anneal_clock: AnnealClock,
    pub predicted_reward: PredictedReward,
    /// Force the predictive target on or off regardless of variant.
    pub force_predictive: Option<bool>,
    /// Force Gumbel-Softmax exploration on or off regardless of variant.
    pub force_gumbel: Option<bool>,
    pub episode: EpisodeConfig,
}

impl Default for TrainingConfig {
    fn default() -> Self {
        Self {
            mode: Mode::Parkinsonian,
            episodes: 150,
            steps_per_episode: 30,
            gamma: 0.99,
            rho: 0.005,
            beta_threshold: 0.35,
            reward_scale: 10.0,
            actor_lr: 0.0005,
            critic_lr: 0.001,
            predictor_lr: 0.001,
            batch_size: 32,
            replay_capacity: 8192,
            hidden: vec![64, 64],
            temperature: AnnealSchedule::temperature(),
            epsilon: AnnealSchedule::epsilon(),
            anneal_clock: AnnealClock::EnvStep,
            predicted_reward: PredictedReward::Additive,
            force_predictive: None,
            force_gumbel: None,
            episode: EpisodeConfig::default(),
        }
    }
}

impl TrainingConfig {
    pub fn components(&self, variant: Variant) -> Components {
        Components {
            predictive: self.force_predictive.unwrap_or(variant.predictive()),
            gumbel: self.force_gumbel.unwrap_or(variant.gumbel()),
        }
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |msg: &str| Err(Error::Config(msg.to_string()));
        if self.episodes == 0 || self.steps_per_episode == 0 {
            return bad("episodes and steps_per_episode must be positive");
        }
        if !(0.0..1.0).contains(&self.gamma) {
            return bad("gamma must lie in [0, 1)");
        }
        if !(self.rho > 0.0 && self.rho <= 1.0) {
            return bad("rho must lie in (0, 1]");
        }
        if self.batch_size == 0 || self.replay_capacity < self.batch_size {
            return bad("replay capacity must hold at least one batch");
        }
        if self.hidden.is_empty() || self.hidden.contains(&0) {
            return bad("hidden layer sizes must be positive");
        }
        if [self.actor_lr, self.critic_lr, self.predictor_lr]
            .iter()
            .any(|lr| !(lr.is_finite() && *lr > 0.0))
        {
            return bad("learning rates must be positive");
        }
        self.temperature.validate()?;
        self.epsilon.validate()?;
        if self.epsilon.start > 1.0 {
            return bad("epsilon must not exceed 1");
        }
        Ok(())
    }

    /// Annealing index at `(episode, step)`.
    pub fn anneal_index(&self, episode: usize, step: usize) -> u64 {
        match self.anneal_clock {
            AnnealClock::EnvStep => (episode * self.steps_per_episode + step) as u64,
            AnnealClock::Episode => episode as u64,
        }
    }
}
