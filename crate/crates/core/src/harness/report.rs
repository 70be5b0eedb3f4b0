use std::path::Path;

use serde::Serialize;

use super::calibrate::CalibrationReport;
use super::eval::{CarrierResult, SeedShiftRow};
use super::output::{ensure_dir, write_csv};
use super::parity::ParityResult;
use crate::agent::Variant;
use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize)]
struct SeedShiftOut {
    variant: Variant,
    train_seed: u64,
    interval: usize,
    reseeds_per_rollout: usize,
    mean_beta_psd: f64,
    mean_reward: f64,
}

pub fn emit_seed_shift(path: &Path, variant: Variant, train_seed: u64, rows: &[SeedShiftRow]) -> Result<()> {
    let out: Vec<SeedShiftOut> = rows
        .iter()
        .map(|r| SeedShiftOut {
            variant,
            train_seed,
            interval: r.interval,
            reseeds_per_rollout: r.reseeds_per_rollout,
            mean_beta_psd: r.mean_beta_psd,
            mean_reward: r.mean_reward,
        })
        .collect();
    write_csv(path, &out, "seed-shift summary")
}

#[derive(Debug, Clone, PartialEq, Serialize)]
struct CarrierStepOut {
    freq_hz: f64,
    controller: &'static str,
    rollout: usize,
    step: usize,
    beta_power: f64,
    reward: f64,
    action: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
struct CarrierSummaryOut {
    freq_hz: f64,
    mean_beta: f64,
    unstimulated_mean_beta: f64,
    suppression: f64,
    stim_fraction: f64,
}

/// `carrier_trajectory.csv` and `carrier_summary.csv` in `dir`.
pub fn emit_carrier(dir: &Path, results: &[CarrierResult]) -> Result<()> {
    let mut steps = Vec::new();
    for r in results {
        for (name, rollouts) in [("policy", &r.policy), ("unstimulated", &r.unstimulated)] {
            for s in rollouts.iter().flat_map(|x| &x.steps) {
                steps.push(CarrierStepOut {
                    freq_hz: r.freq_hz,
                    controller: name,
                    rollout: s.rollout,
                    step: s.step,
                    beta_power: s.beta_power,
                    reward: s.reward,
                    action: s.action,
                });
            }
        }
    }
    let summary: Vec<CarrierSummaryOut> = results
        .iter()
        .map(|r| CarrierSummaryOut {
            freq_hz: r.freq_hz,
            mean_beta: r.mean_beta(),
            unstimulated_mean_beta: r.unstimulated_mean_beta(),
            suppression: r.suppression(),
            stim_fraction: r.stim_fraction(),
        })
        .collect();
    if steps.is_empty() {
        return Err(Error::EmptyMetrics("carrier rollouts"));
    }
    ensure_dir(dir)?;
    write_csv(&dir.join("carrier_trajectory.csv"), &steps, "carrier rollouts")?;
    write_csv(&dir.join("carrier_summary.csv"), &summary, "carrier summary")
}

#[derive(Debug, Clone, PartialEq, Serialize)]
struct ParityStepOut {
    rollout: usize,
    step: usize,
    beta_fp32: f64,
    beta_fp16: f64,
    action_fp32: usize,
    action_fp16: usize,
}

/// `parity_trajectory.csv` and `parity_summary.csv` in `dir`.
pub fn emit_parity(dir: &Path, result: &ParityResult) -> Result<()> {
    let steps: Vec<ParityStepOut> = result
        .fp32
        .iter()
        .flat_map(|r| &r.steps)
        .zip(result.fp16.iter().flat_map(|r| &r.steps))
        .map(|(a, b)| ParityStepOut {
            rollout: a.rollout,
            step: a.step,
            beta_fp32: a.beta_power,
            beta_fp16: b.beta_power,
            action_fp32: a.action,
            action_fp16: b.action,
        })
        .collect();
    if steps.is_empty() {
        return Err(Error::EmptyMetrics("parity rollouts"));
    }
    ensure_dir(dir)?;
    write_csv(&dir.join("parity_trajectory.csv"), &steps, "parity rollouts")?;
    write_csv(
        &dir.join("parity_summary.csv"),
        std::slice::from_ref(&result.summary),
        "parity summary",
    )
}

pub fn emit_calibration(path: &Path, report: &CalibrationReport) -> Result<()> {
    write_csv(path, &report.rows, "calibration")
}
