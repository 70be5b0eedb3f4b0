use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::config::{Components, TrainingConfig, Variant};
use super::networks::{
    actor_update, concat, critic_update, predictive_update, AgentNetworks, Optimizers, N_ACTIONS,
};
use super::policy::{argmax, compute_reward, one_hot, relaxed_softmax, sample_gumbel_pair};
use super::replay::{ReplayBuffer, Transition};
use crate::env::{ClosedLoopEnv, NetworkConfig, StimConfig, Stimulate};
use crate::error::{Error, Result};

// Independent random streams derived from the run seed.
const STREAM_INIT: u64 = 1;
const STREAM_EXPLORE: u64 = 2;
const STREAM_REPLAY: u64 = 3;
const STREAM_ENV: u64 = 4;

pub fn stream(seed: u64, id: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(id);
    rng
}

/// One row of the training log.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StepRecord {
    pub episode: usize,
    pub step: usize,
    pub beta_power: f64,
    pub reward: f64,
    pub r_hat: f64,
    pub tau: f64,
    pub critic_loss: Option<f64>,
    pub actor_loss: Option<f64>,
    pub pred_loss: Option<f64>,
    pub action: usize,
}

/// Per-episode aggregate of the training log.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpisodeSummary {
    pub episode: usize,
    pub mean_beta: f64,
    pub cumulative_reward: f64,
    pub stim_fraction: f64,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct RunMetrics {
    pub rows: Vec<StepRecord>,
}

impl RunMetrics {
    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    pub fn episodes(&self) -> Vec<EpisodeSummary> {
        let mut out: Vec<EpisodeSummary> = Vec::new();
        let mut count = 0usize;
        let mut stims = 0usize;
        for r in &self.rows {
            if out.last().map(|e| e.episode) != Some(r.episode) {
                if let Some(last) = out.last_mut() {
                    last.mean_beta /= count as f64;
                    last.stim_fraction = stims as f64 / count as f64;
                }
                out.push(EpisodeSummary {
                    episode: r.episode,
                    mean_beta: 0.0,
                    cumulative_reward: 0.0,
                    stim_fraction: 0.0,
                });
                count = 0;
                stims = 0;
            }
            let e = out.last_mut().unwrap();
            e.mean_beta += r.beta_power;
            e.cumulative_reward += r.reward;
            count += 1;
            stims += r.action;
        }
        if let Some(last) = out.last_mut() {
            last.mean_beta /= count as f64;
            last.stim_fraction = stims as f64 / count as f64;
        }
        out
    }

    /// Mean beta power over the last `k` episodes.
    pub fn final_mean_beta(&self, k: usize) -> Option<f64> {
        let eps = self.episodes();
        if eps.is_empty() {
            return None;
        }
        let tail = &eps[eps.len().saturating_sub(k)..];
        Some(tail.iter().map(|e| e.mean_beta).sum::<f64>() / tail.len() as f64)
    }

    pub fn all_finite(&self) -> bool {
        self.rows.iter().all(|r| {
            [r.beta_power, r.reward, r.r_hat, r.tau]
                .iter()
                .all(|v| v.is_finite())
                && [r.critic_loss, r.actor_loss, r.pred_loss]
                    .iter()
                    .flatten()
                    .all(|v| v.is_finite())
        })
    }
}

/// Everything a finished run produces.
#[derive(Debug, Clone)]
pub struct TrainedAgent {
    pub variant: Variant,
    pub components: Components,
    pub seed: u64,
    pub nets: AgentNetworks<f32>,
    pub metrics: RunMetrics,
}

fn to_f32(v: &[f64]) -> Vec<f32> {
    v.iter().map(|x| *x as f32).collect()
}

/// Greedy action: argmax of the actor logits.
pub fn greedy_action(nets: &AgentNetworks<f32>, state: &[f64]) -> Result<Stimulate> {
    Ok(Stimulate::from_index(argmax(&nets.logits(&to_f32(state))?)))
}

struct Learner<'a> {
    cfg: &'a TrainingConfig,
    comp: Components,
    nets: AgentNetworks<f32>,
    opts: Optimizers<f32>,
    replay: ReplayBuffer,
    explore: ChaCha8Rng,
    sampler: ChaCha8Rng,
}

struct Losses {
    critic: f64,
    actor: f64,
    pred: Option<f64>,
}

impl Learner<'_> {
    /// Chooses an action; returns the discrete action, the vector fed to
    /// the critic, the logits and the predicted reward.
    fn act(&mut self, s: &[f32], tau: f64, epsilon: f64) -> Result<(usize, [f32; 2], [f32; 2], f32)> {
        let logits = self.nets.logits(s)?;
        let (action, relaxed) = if self.comp.gumbel {
            let g = sample_gumbel_pair(&mut self.explore).map(|x| x as f32);
            let y = relaxed_softmax(&logits, &g, tau as f32);
            (argmax(&y), [y[0], y[1]])
        } else {
            let a = if self.explore.random::<f64>() < epsilon {
                self.explore.random_range(0..N_ACTIONS)
            } else {
                argmax(&logits)
            };
            let h = one_hot(a, N_ACTIONS);
            (a, [h[0] as f32, h[1] as f32])
        };
        let r_hat = if self.comp.predictive {
            self.nets.predict_reward(s, &relaxed)?
        } else {
            0.0
        };
        Ok((action, relaxed, [logits[0], logits[1]], r_hat))
    }

    fn update(&mut self, tau: f64) -> Result<Losses> {
        let batch = self.replay.sample(&mut self.sampler, self.cfg.batch_size)?;
        let inputs: Vec<Vec<f32>> = batch.iter().map(|t| concat(&t.s, &t.a)).collect();
        let targets = batch
            .iter()
            .map(|t| {
                self.nets.q_target(
                    t.r,
                    t.r_hat,
                    &t.s_next,
                    self.comp.predictive,
                    self.cfg.predicted_reward,
                )
            })
            .collect::<Result<Vec<f32>>>()?;
        let states: Vec<Vec<f32>> = batch.iter().map(|t| t.s.clone()).collect();
        let rewards: Vec<f32> = batch.iter().map(|t| t.r).collect();
        drop(batch);

        let critic = critic_update(&mut self.nets.critic, &mut self.opts.critic, &inputs, &targets)?;

        let (noise, actor_tau) = if self.comp.gumbel {
            let noise: Vec<[f32; 2]> = (0..states.len())
                .map(|_| sample_gumbel_pair(&mut self.explore).map(|x| x as f32))
                .collect();
            (noise, tau as f32)
        } else {
            (vec![[0.0; 2]; states.len()], 1.0)
        };
        let actor = actor_update(
            &mut self.nets.actor,
            &self.nets.critic,
            &mut self.opts.actor,
            &states,
            &noise,
            actor_tau,
        )?;

        let pred = if self.comp.predictive {
            Some(predictive_update(
                &mut self.nets.predictor,
                &mut self.opts.predictor,
                &inputs,
                &rewards,
            )?)
        } else {
            None
        };

        self.nets.soft_update(self.cfg.rho as f32)?;
        if !self.nets.is_finite() {
            return Err(Error::NonFinite("network parameters"));
        }
        Ok(Losses {
            critic: critic as f64,
            actor: actor as f64,
            pred: pred.map(|p| p as f64),
        })
    }
}

/// Runs the full training procedure for `variant` and returns the trained
/// networks with their per-step log.
pub fn train(
    network: &NetworkConfig,
    stim: &StimConfig,
    cfg: &TrainingConfig,
    variant: Variant,
    seed: u64,
) -> Result<TrainedAgent> {
    cfg.validate()?;
    let comp = cfg.components(variant);
    let mut init = stream(seed, STREAM_INIT);
    let nets = AgentNetworks::<f32>::init(
        cfg.episode.n_obs,
        &cfg.hidden,
        cfg.gamma,
        cfg.temperature.floor,
        &mut init,
    );
    let opts = Optimizers::new(&nets, cfg.actor_lr, cfg.critic_lr, cfg.predictor_lr);
    let mut learner = Learner {
        cfg,
        comp,
        nets,
        opts,
        replay: ReplayBuffer::new(cfg.replay_capacity),
        explore: stream(seed, STREAM_EXPLORE),
        sampler: stream(seed, STREAM_REPLAY),
    };
    let mut env_seeds = stream(seed, STREAM_ENV);
    let mut env = ClosedLoopEnv::new(network, *stim, cfg.episode, cfg.mode, env_seeds.random())?;
    let mut metrics = RunMetrics::default();

    for episode in 0..cfg.episodes {
        let mut s = if episode == 0 {
            env.state()
        } else {
            env.reset(env_seeds.random())?.state
        };
        for step in 0..cfg.steps_per_episode {
            let t = cfg.anneal_index(episode, step);
            let tau = cfg.temperature.at(t);
            let epsilon = cfg.epsilon.at(t);
            let s32 = to_f32(&s);
            let (action, relaxed, logits, r_hat) = learner.act(&s32, tau, epsilon)?;
            let obs = env.step(Stimulate::from_index(action))?;
            let reward = compute_reward(obs.mean_beta, cfg.beta_threshold, cfg.reward_scale);
            learner.replay.push(Transition {
                s: s32,
                a: relaxed,
                a_logits: logits,
                r: reward as f32,
                r_hat,
                s_next: to_f32(&obs.state),
            })?;
            let losses = if learner.replay.len() >= cfg.batch_size {
                Some(learner.update(tau)?)
            } else {
                None
            };
            metrics.rows.push(StepRecord {
                episode,
                step,
                beta_power: obs.beta,
                reward,
                r_hat: r_hat as f64,
                tau,
                critic_loss: losses.as_ref().map(|l| l.critic),
                actor_loss: losses.as_ref().map(|l| l.actor),
                pred_loss: losses.as_ref().and_then(|l| l.pred),
                action,
            });
            s = obs.state;
        }
    }

    Ok(TrainedAgent {
        variant,
        components: comp,
        seed,
        nets: learner.nets,
        metrics,
    })
}
