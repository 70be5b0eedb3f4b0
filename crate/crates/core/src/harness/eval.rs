use rand::Rng;
use serde::Serialize;

use super::config::EvalConfig;
use super::stats::mean;
use crate::agent::train::stream;
use crate::agent::{compute_reward, greedy_action, AgentNetworks, TrainingConfig};
use crate::env::{ClosedLoopEnv, NetworkConfig, StimConfig, Stimulate};
use crate::error::{Error, Result};

/// Steps at which the environment is (re)seeded: every `n` steps from 0.
pub fn reseed_steps(n: usize, steps: usize) -> Result<Vec<usize>> {
    if n == 0 {
        return Err(Error::Config("seed-change interval must be positive".into()));
    }
    Ok((0..steps).step_by(n).collect())
}

/// Who picks the actions during a rollout.
#[derive(Debug, Clone, Copy)]
pub enum Controller<'a> {
    Greedy(&'a AgentNetworks<f32>),
    Constant(Stimulate),
}

impl Controller<'_> {
    fn act(&self, state: &[f64]) -> Result<Stimulate> {
        match self {
            Controller::Greedy(nets) => greedy_action(nets, state),
            Controller::Constant(a) => Ok(*a),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RolloutStep {
    pub rollout: usize,
    pub step: usize,
    pub beta_power: f64,
    pub mean_beta: f64,
    pub reward: f64,
    pub action: usize,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct Rollout {
    pub steps: Vec<RolloutStep>,
    pub reseeds: usize,
}

impl Rollout {
    pub fn mean_beta(&self) -> f64 {
        mean(&self.steps.iter().map(|s| s.beta_power).collect::<Vec<_>>())
    }

    pub fn mean_reward(&self) -> f64 {
        mean(&self.steps.iter().map(|s| s.reward).collect::<Vec<_>>())
    }

    pub fn actions(&self) -> Vec<usize> {
        self.steps.iter().map(|s| s.action).collect()
    }
}

/// Environment seeds used by rollout `index`; identical for every
/// controller so comparisons are paired.
pub(crate) fn rollout_seeds(eval: &EvalConfig, index: usize) -> impl FnMut() -> u64 {
    let mut rng = stream(eval.seed, 1000 + index as u64);
    move || rng.random()
}

/// Greedy evaluation rollout, re-seeding the environment every `interval`
/// steps (`None`: never after the start).
#[allow(clippy::too_many_arguments)]
pub fn rollout(
    controller: Controller<'_>,
    network: &NetworkConfig,
    stim: &StimConfig,
    training: &TrainingConfig,
    eval: &EvalConfig,
    index: usize,
    interval: Option<usize>,
) -> Result<Rollout> {
    let steps = eval.rollout_steps;
    let schedule = reseed_steps(interval.unwrap_or(steps), steps)?;
    let mut next_seed = rollout_seeds(eval, index);
    let mut env = ClosedLoopEnv::new(network, *stim, training.episode, training.mode, next_seed())?;
    let mut state = env.state();
    let mut out = Rollout {
        steps: Vec::with_capacity(steps),
        reseeds: schedule.len(),
    };
    for step in 0..steps {
        if step > 0 && schedule.contains(&step) {
            state = env.reset(next_seed())?.state;
        }
        let action = controller.act(&state)?;
        let obs = env.step(action)?;
        out.steps.push(RolloutStep {
            rollout: index,
            step,
            beta_power: obs.beta,
            mean_beta: obs.mean_beta,
            reward: compute_reward(obs.mean_beta, training.beta_threshold, training.reward_scale),
            action: action.index(),
        });
        state = obs.state;
    }
    Ok(out)
}

/// All configured rollouts for one controller.
pub fn rollouts(
    controller: Controller<'_>,
    network: &NetworkConfig,
    stim: &StimConfig,
    training: &TrainingConfig,
    eval: &EvalConfig,
    interval: Option<usize>,
) -> Result<Vec<Rollout>> {
    (0..eval.rollouts)
        .map(|k| rollout(controller, network, stim, training, eval, k, interval))
        .collect()
}

pub fn pooled_mean_beta(rs: &[Rollout]) -> f64 {
    mean(
        &rs.iter()
            .flat_map(|r| r.steps.iter().map(|s| s.beta_power))
            .collect::<Vec<_>>(),
    )
}

pub fn pooled_mean_reward(rs: &[Rollout]) -> f64 {
    mean(
        &rs.iter()
            .flat_map(|r| r.steps.iter().map(|s| s.reward))
            .collect::<Vec<_>>(),
    )
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SeedShiftRow {
    pub interval: usize,
    pub reseeds_per_rollout: usize,
    pub mean_beta_psd: f64,
    pub mean_reward: f64,
}

pub fn run_seed_shift_eval(
    nets: &AgentNetworks<f32>,
    network: &NetworkConfig,
    stim: &StimConfig,
    training: &TrainingConfig,
    eval: &EvalConfig,
) -> Result<Vec<SeedShiftRow>> {
    eval.validate()?;
    eval.intervals
        .iter()
        .map(|&n| {
            let rs = rollouts(Controller::Greedy(nets), network, stim, training, eval, Some(n))?;
            Ok(SeedShiftRow {
                interval: n,
                reseeds_per_rollout: rs[0].reseeds,
                mean_beta_psd: pooled_mean_beta(&rs),
                mean_reward: pooled_mean_reward(&rs),
            })
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq)]
pub struct CarrierResult {
    pub freq_hz: f64,
    pub policy: Vec<Rollout>,
    pub unstimulated: Vec<Rollout>,
}

impl CarrierResult {
    pub fn mean_beta(&self) -> f64 {
        pooled_mean_beta(&self.policy)
    }

    pub fn unstimulated_mean_beta(&self) -> f64 {
        pooled_mean_beta(&self.unstimulated)
    }

    /// Drop in mean beta relative to the unstimulated rollouts.
    pub fn suppression(&self) -> f64 {
        self.unstimulated_mean_beta() - self.mean_beta()
    }

    pub fn stim_fraction(&self) -> f64 {
        mean(
            &self
                .policy
                .iter()
                .flat_map(|r| r.steps.iter().map(|s| s.action as f64))
                .collect::<Vec<_>>(),
        )
    }
}

pub fn run_carrier_eval(
    nets: &AgentNetworks<f32>,
    network: &NetworkConfig,
    stim: &StimConfig,
    training: &TrainingConfig,
    eval: &EvalConfig,
    freq_hz: f64,
) -> Result<CarrierResult> {
    eval.validate()?;
    let stim = stim.with_freq(freq_hz);
    stim.validate()?;
    Ok(CarrierResult {
        freq_hz,
        policy: rollouts(Controller::Greedy(nets), network, &stim, training, eval, None)?,
        unstimulated: rollouts(
            Controller::Constant(Stimulate::Off),
            network,
            &stim,
            training,
            eval,
            None,
        )?,
    })
}
