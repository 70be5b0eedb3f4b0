use serde::{Deserialize, Serialize};

use super::config::{Mode, NetworkConfig, StimConfig, POP_SIZE};
use super::network::{NetworkState, Stimulate};
use crate::biomarker::{BandConfig, BetaPower, BetaTracker, ObservationWindow};
use crate::error::{Error, Result};

/// How observations are formed around the raw network.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct EpisodeConfig {
    /// Length of the observation window (agent state size).
    pub n_obs: usize,
    /// Rolling PSD analysis window (ms).
    pub analysis_window_ms: f64,
    /// Unstimulated run after every reset before the first observation (ms).
    pub warmup_ms: f64,
    pub bands: BandConfig,
}

impl Default for EpisodeConfig {
    fn default() -> Self {
        Self {
            n_obs: 5,
            analysis_window_ms: 128.0,
            warmup_ms: 128.0,
            bands: BandConfig::default(),
        }
    }
}

impl EpisodeConfig {
    pub fn validate(&self, net: &NetworkConfig) -> Result<()> {
        if self.n_obs == 0 {
            return Err(Error::Config("n_obs must be at least 1".into()));
        }
        if self.warmup_ms + 1e-9 < self.analysis_window_ms {
            return Err(Error::Config(format!(
                "warm-up ({} ms) must cover the analysis window ({} ms)",
                self.warmup_ms, self.analysis_window_ms
            )));
        }
        let steps = self.warmup_ms / net.step_ms;
        if (steps - steps.round()).abs() > 1e-9 {
            return Err(Error::Config("warm-up is not a whole number of env steps".into()));
        }
        Ok(())
    }

    pub fn warmup_steps(&self, net: &NetworkConfig) -> usize {
        (self.warmup_ms / net.step_ms).round() as usize
    }
}

/// Result of one closed-loop step.
#[derive(Debug, Clone, PartialEq)]
pub struct Observation {
    pub state: Vec<f64>,
    /// Relative beta power of the newest analysis window.
    pub beta: f64,
    /// Mean over the observation window.
    pub mean_beta: f64,
}

/// Network plus biomarker pipeline: actions in, beta observations out.
#[derive(Debug, Clone)]
pub struct ClosedLoopEnv {
    net: NetworkState,
    stim: StimConfig,
    episode: EpisodeConfig,
    tracker: BetaTracker,
    window: ObservationWindow,
}

impl ClosedLoopEnv {
    pub fn new(
        network: &NetworkConfig,
        stim: StimConfig,
        episode: EpisodeConfig,
        mode: Mode,
        seed: u64,
    ) -> Result<Self> {
        stim.validate()?;
        episode.validate(network)?;
        let net = NetworkState::new(network, seed, mode)?;
        let tracker = BetaTracker::new(
            episode.analysis_window_ms,
            network.sample_rate,
            POP_SIZE,
            episode.bands,
        )?;
        let mut env = Self {
            net,
            stim,
            episode,
            tracker,
            window: ObservationWindow::new(episode.n_obs),
        };
        env.warm_up()?;
        Ok(env)
    }

    /// Fresh network from `seed`, cleared history, then the unstimulated
    /// warm-up. Returns the first state.
    pub fn reset(&mut self, seed: u64) -> Result<Observation> {
        let mode = self.net.mode();
        self.net.reset(seed, mode)?;
        self.warm_up()
    }

    fn warm_up(&mut self) -> Result<Observation> {
        self.tracker.clear();
        self.window.clear();
        for trace in self
            .net
            .run_unstimulated(self.episode.warmup_steps(self.net.config()))
        {
            self.tracker.push_trace(&trace);
        }
        let beta = self.tracker.beta_power()?;
        Ok(self.observe(beta))
    }

    fn observe(&mut self, beta: BetaPower) -> Observation {
        let state = self.window.push_and_build_state(beta);
        Observation {
            state,
            beta: beta.value(),
            mean_beta: self.window.mean_beta(),
        }
    }

    pub fn step(&mut self, action: Stimulate) -> Result<Observation> {
        let trace = self.net.step(action, &self.stim);
        self.tracker.push_trace(&trace);
        let beta = self.tracker.beta_power()?;
        Ok(self.observe(beta))
    }

    pub fn state(&self) -> Vec<f64> {
        self.window.state()
    }

    pub fn network(&self) -> &NetworkState {
        &self.net
    }

    pub fn stim(&self) -> &StimConfig {
        &self.stim
    }

    pub fn n_obs(&self) -> usize {
        self.episode.n_obs
    }
}
