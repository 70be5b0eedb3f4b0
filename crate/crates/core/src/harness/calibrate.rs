use serde::Serialize;

use super::config::CalibrationConfig;
use super::stats::{mann_whitney_greater, MannWhitney};
use crate::biomarker::{BandConfig, BetaTracker};
use crate::env::{Mode, NetworkConfig, NetworkState, StimConfig, Stimulate, POP_SIZE};
use crate::error::{Error, Result};

/// Relative beta power read at the end of an unstimulated (or
/// continuously stimulated) run of `duration_ms`.
pub fn beta_after(
    network: &NetworkConfig,
    stim: &StimConfig,
    seed: u64,
    mode: Mode,
    duration_ms: f64,
    window_ms: f64,
    action: Stimulate,
) -> Result<f64> {
    let mut net = NetworkState::new(network, seed, mode)?;
    let mut tracker = BetaTracker::new(window_ms, network.sample_rate, POP_SIZE, BandConfig::default())?;
    let steps = (duration_ms / network.step_ms).round() as usize;
    for _ in 0..steps {
        tracker.push_trace(&net.step(action, stim));
    }
    Ok(tracker.beta_power()?.value())
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CalibrationRow {
    pub seed: u64,
    pub mode: Mode,
    /// Unstimulated relative beta power.
    pub beta_power: f64,
    /// Relative beta power under continuous 50 Hz stimulation (parkinsonian only).
    pub stimulated_beta_power: Option<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct CalibrationReport {
    pub rows: Vec<CalibrationRow>,
    pub threshold: f64,
    pub max_separation_p: f64,
    pub separation: Option<MannWhitney>,
}

impl CalibrationReport {
    fn betas(&self, mode: Mode) -> Vec<f64> {
        self.rows
            .iter()
            .filter(|r| r.mode == mode)
            .map(|r| r.beta_power)
            .collect()
    }

    pub fn parkinsonian_above(&self) -> usize {
        self.betas(Mode::Parkinsonian)
            .iter()
            .filter(|b| **b > self.threshold)
            .count()
    }

    pub fn healthy_below(&self) -> usize {
        self.betas(Mode::Healthy)
            .iter()
            .filter(|b| **b < self.threshold)
            .count()
    }

    /// Seeds on which continuous stimulation lowered parkinsonian beta.
    pub fn stimulation_effective(&self) -> usize {
        self.rows
            .iter()
            .filter(|r| matches!(r.stimulated_beta_power, Some(s) if s < r.beta_power))
            .count()
    }

    pub fn seeds(&self) -> usize {
        self.betas(Mode::Healthy).len()
    }

    pub fn passed(&self) -> bool {
        let n = self.seeds();
        n > 0
            && self.parkinsonian_above() == n
            && self.healthy_below() == n
            && self.stimulation_effective() == n
            && self.separation.is_some_and(|m| m.p < self.max_separation_p)
    }

    pub fn ensure_passed(&self) -> Result<()> {
        if self.passed() {
            return Ok(());
        }
        Err(Error::Calibration(format!(
            "parkinsonian > {t} on {pa}/{n} seeds, healthy < {t} on {hb}/{n}, \
             stimulation effective on {se}/{n}, separation p = {p:.3e}",
            t = self.threshold,
            pa = self.parkinsonian_above(),
            hb = self.healthy_below(),
            se = self.stimulation_effective(),
            n = self.seeds(),
            p = self.separation.map_or(f64::NAN, |m| m.p),
        )))
    }
}

/// Checks that the network separates the two modes and that stimulation
/// suppresses parkinsonian beta.
pub fn calibrate(
    network: &NetworkConfig,
    stim: &StimConfig,
    cfg: &CalibrationConfig,
    window_ms: f64,
) -> Result<CalibrationReport> {
    let mut rows = Vec::new();
    for seed in 0..cfg.seeds {
        for mode in [Mode::Healthy, Mode::Parkinsonian] {
            let beta = beta_after(
                network,
                stim,
                seed,
                mode,
                cfg.duration_ms,
                window_ms,
                Stimulate::Off,
            )?;
            let stimulated = if mode == Mode::Parkinsonian {
                Some(beta_after(
                    network,
                    stim,
                    seed,
                    mode,
                    cfg.duration_ms,
                    window_ms,
                    Stimulate::On,
                )?)
            } else {
                None
            };
            rows.push(CalibrationRow {
                seed,
                mode,
                beta_power: beta,
                stimulated_beta_power: stimulated,
            });
        }
    }
    let mut report = CalibrationReport {
        rows,
        threshold: cfg.threshold,
        max_separation_p: cfg.max_separation_p,
        separation: None,
    };
    report.separation = mann_whitney_greater(&report.betas(Mode::Parkinsonian), &report.betas(Mode::Healthy));
    Ok(report)
}
