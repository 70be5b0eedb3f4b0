use serde::Serialize;

use super::config::EvalConfig;
use super::eval::{pooled_mean_beta, rollout_seeds, rollouts, Controller, Rollout};
use crate::agent::{argmax, AgentNetworks, TrainingConfig};
use crate::env::{ClosedLoopEnv, NetworkConfig, StimConfig, Stimulate};
use crate::error::Result;
use crate::quantizer::ModelCheckpoint;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ParitySummary {
    pub payload_bytes_fp32: usize,
    pub payload_bytes_fp16: usize,
    pub payload_ratio: f64,
    pub mean_beta_fp32: f64,
    pub mean_beta_fp16: f64,
    /// `|fp16 − fp32| / fp32` of the mean beta power.
    pub relative_difference: f64,
    pub action_agreement: f64,
    /// Largest absolute actor-logit difference on the fp32 rollout states.
    pub max_logit_difference: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ParityResult {
    pub summary: ParitySummary,
    pub fp32: Vec<Rollout>,
    pub fp16: Vec<Rollout>,
}

/// Quantizes `ckpt` and runs both precisions through the same evaluation seeds.
pub fn run_quantization_parity(
    ckpt: &ModelCheckpoint,
    network: &NetworkConfig,
    stim: &StimConfig,
    training: &TrainingConfig,
    eval: &EvalConfig,
) -> Result<ParityResult> {
    let quantized = ckpt.quantize_fp16()?;
    let full = ckpt.load_for_inference();
    let half = quantized.load_for_inference();
    let fp32 = rollouts(Controller::Greedy(&full), network, stim, training, eval, None)?;
    let fp16 = rollouts(Controller::Greedy(&half), network, stim, training, eval, None)?;

    let total = fp32.iter().map(|r| r.steps.len()).sum::<usize>();
    let agree = fp32
        .iter()
        .zip(&fp16)
        .map(|(a, b)| {
            a.actions()
                .iter()
                .zip(b.actions())
                .filter(|(x, y)| **x == *y)
                .count()
        })
        .sum::<usize>();

    let max_logit_difference = logit_gap(&full, &half, network, stim, training, eval)?;
    let mean32 = pooled_mean_beta(&fp32);
    let mean16 = pooled_mean_beta(&fp16);
    Ok(ParityResult {
        summary: ParitySummary {
            payload_bytes_fp32: ckpt.payload_bytes(),
            payload_bytes_fp16: quantized.payload_bytes(),
            payload_ratio: quantized.payload_bytes() as f64 / ckpt.payload_bytes() as f64,
            mean_beta_fp32: mean32,
            mean_beta_fp16: mean16,
            relative_difference: (mean16 - mean32).abs() / mean32.abs(),
            action_agreement: agree as f64 / total as f64,
            max_logit_difference,
        },
        fp32,
        fp16,
    })
}

/// Replays the first fp32 rollout's states through both actors.
fn logit_gap(
    full: &AgentNetworks<f32>,
    half: &AgentNetworks<f32>,
    network: &NetworkConfig,
    stim: &StimConfig,
    training: &TrainingConfig,
    eval: &EvalConfig,
) -> Result<f64> {
    let mut seeds = rollout_seeds(eval, 0);
    let mut env = ClosedLoopEnv::new(network, *stim, training.episode, training.mode, seeds())?;
    let mut state = env.state();
    let mut gap = 0f64;
    for _ in 0..eval.rollout_steps {
        let s: Vec<f32> = state.iter().map(|v| *v as f32).collect();
        let a = full.logits(&s)?;
        let b = half.logits(&s)?;
        for (x, y) in a.iter().zip(&b) {
            gap = gap.max((x - y).abs() as f64);
        }
        let action = Stimulate::from_index(argmax(&a));
        state = env.step(action)?.state;
    }
    Ok(gap)
}
