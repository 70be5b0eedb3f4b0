use rand::Rng;

use super::config::PredictedReward;
use super::policy::{relaxed_softmax, softmax_backward};
use crate::error::{Error, Result};
use crate::nn::{mse, Activation, AdamParams, AdamState, Architecture, Gradients, Mlp};
use crate::scalar::Scalar;

pub const N_ACTIONS: usize = 2;

pub fn actor_architecture(n_obs: usize, hidden: &[usize]) -> Architecture {
    let mut sizes = vec![n_obs];
    sizes.extend_from_slice(hidden);
    sizes.push(N_ACTIONS);
    Architecture::new(&sizes, Activation::Relu, Activation::Identity)
}

/// Shared by the critic and the reward model: `(s, a) -> scalar`.
pub fn value_architecture(n_obs: usize, hidden: &[usize]) -> Architecture {
    let mut sizes = vec![n_obs + N_ACTIONS];
    sizes.extend_from_slice(hidden);
    sizes.push(1);
    Architecture::new(&sizes, Activation::Relu, Activation::Identity)
}

pub fn concat<T: Copy>(s: &[T], a: &[T]) -> Vec<T> {
    let mut x = Vec::with_capacity(s.len() + a.len());
    x.extend_from_slice(s);
    x.extend_from_slice(a);
    x
}

/// Actor, critic, their targets and the reward model.
#[derive(Debug, Clone, PartialEq)]
pub struct AgentNetworks<T> {
    pub actor: Mlp<T>,
    pub critic: Mlp<T>,
    pub target_actor: Mlp<T>,
    pub target_critic: Mlp<T>,
    pub predictor: Mlp<T>,
    pub gamma: T,
    /// Temperature of the deterministic target-actor softmax.
    pub target_tau: T,
}

impl<T: Scalar> AgentNetworks<T> {
    /// Online networks drawn from `rng` (actor, critic, predictor in that
    /// order); targets start as copies.
    pub fn init<R: Rng + ?Sized>(
        n_obs: usize,
        hidden: &[usize],
        gamma: f64,
        target_tau: f64,
        rng: &mut R,
    ) -> Self {
        let actor = Mlp::he_uniform(&actor_architecture(n_obs, hidden), rng);
        let critic = Mlp::he_uniform(&value_architecture(n_obs, hidden), rng);
        let predictor = Mlp::he_uniform(&value_architecture(n_obs, hidden), rng);
        Self {
            target_actor: actor.clone(),
            target_critic: critic.clone(),
            actor,
            critic,
            predictor,
            gamma: T::lit(gamma),
            target_tau: T::lit(target_tau),
        }
    }

    pub fn n_obs(&self) -> usize {
        self.actor.n_in()
    }

    pub fn is_finite(&self) -> bool {
        [
            &self.actor,
            &self.critic,
            &self.target_actor,
            &self.target_critic,
            &self.predictor,
        ]
        .iter()
        .all(|n| n.is_finite())
    }

    pub fn logits(&self, s: &[T]) -> Result<Vec<T>> {
        self.actor.forward(s)
    }

    pub fn predict_reward(&self, s: &[T], a: &[T]) -> Result<T> {
        Ok(self.predictor.forward(&concat(s, a))?[0])
    }

    /// Target-actor action at `s`: noiseless softmax at `target_tau`.
    pub fn target_action(&self, s: &[T]) -> Result<Vec<T>> {
        let logits = self.target_actor.forward(s)?;
        Ok(relaxed_softmax(&logits, &[T::zero(); N_ACTIONS], self.target_tau))
    }

    fn bootstrap(&self, s_next: &[T]) -> Result<T> {
        let a = self.target_action(s_next)?;
        Ok(self.gamma * self.target_critic.forward(&concat(s_next, &a))?[0])
    }

    /// `r + γ Q'(s', π'(s'))`
    pub fn q_target_baseline(&self, r: T, s_next: &[T]) -> Result<T> {
        Ok(r + self.bootstrap(s_next)?)
    }

    /// `r + r̂ + γ Q'(s', π'(s'))`
    pub fn q_target_predictive(&self, r: T, r_hat: T, s_next: &[T]) -> Result<T> {
        Ok(r + r_hat + self.bootstrap(s_next)?)
    }

    pub fn q_target(
        &self,
        r: T,
        r_hat: T,
        s_next: &[T],
        predictive: bool,
        rule: PredictedReward,
    ) -> Result<T> {
        match (predictive, rule) {
            (false, _) => self.q_target_baseline(r, s_next),
            (true, PredictedReward::Additive) => self.q_target_predictive(r, r_hat, s_next),
            (true, PredictedReward::Substitute) => Ok(r_hat + self.bootstrap(s_next)?),
        }
    }

    /// `target ← rho·online + (1 − rho)·target` for actor and critic.
    pub fn soft_update(&mut self, rho: T) -> Result<()> {
        self.target_actor.soft_update_from(&self.actor, rho)?;
        self.target_critic.soft_update_from(&self.critic, rho)
    }
}

/// Mean squared error of `net` over `(input, target)` pairs, with gradients.
pub fn regression_loss<T: Scalar>(
    net: &Mlp<T>,
    inputs: &[Vec<T>],
    targets: &[T],
) -> Result<(T, Gradients<T>)> {
    if inputs.is_empty() || inputs.len() != targets.len() {
        return Err(Error::Dimension {
            expected: inputs.len().max(1),
            got: targets.len(),
        });
    }
    let n = T::lit(inputs.len() as f64);
    let mut grads = Gradients::zeros_like(net);
    let mut loss = T::zero();
    for (x, y) in inputs.iter().zip(targets) {
        let tape = net.forward_tape(x)?;
        let (l, d) = mse(tape.output(), &[*y]);
        loss += l;
        let (g, _) = net.backward(&tape, &[d[0] / n])?;
        grads.add_assign(&g);
    }
    Ok((loss / n, grads))
}

/// `−mean Q(s, softmax((π(s) + g) / τ))` and its gradient with respect to
/// the actor. `noise[i]` is the frozen perturbation for `states[i]`
/// (zeros for a noiseless relaxation).
pub fn actor_loss<T: Scalar>(
    actor: &Mlp<T>,
    critic: &Mlp<T>,
    states: &[Vec<T>],
    noise: &[[T; N_ACTIONS]],
    tau: T,
) -> Result<(T, Gradients<T>)> {
    if states.is_empty() || states.len() != noise.len() {
        return Err(Error::Dimension {
            expected: states.len().max(1),
            got: noise.len(),
        });
    }
    let n = T::lit(states.len() as f64);
    let mut grads = Gradients::zeros_like(actor);
    let mut loss = T::zero();
    for (s, g) in states.iter().zip(noise) {
        let actor_tape = actor.forward_tape(s)?;
        let a = relaxed_softmax(actor_tape.output(), g, tau);
        let critic_tape = critic.forward_tape(&concat(s, &a))?;
        loss -= critic_tape.output()[0];
        let (_, dx) = critic.backward(&critic_tape, &[-T::one() / n])?;
        let da = &dx[s.len()..];
        let dlogits = softmax_backward(&a, da, tau);
        let (ga, _) = actor.backward(&actor_tape, &dlogits)?;
        grads.add_assign(&ga);
    }
    Ok((loss / n, grads))
}

/// Adam states of the three trained networks.
#[derive(Debug, Clone, PartialEq)]
pub struct Optimizers<T> {
    pub actor: AdamState<T>,
    pub critic: AdamState<T>,
    pub predictor: AdamState<T>,
}

impl<T: Scalar> Optimizers<T> {
    pub fn new(nets: &AgentNetworks<T>, actor_lr: f64, critic_lr: f64, predictor_lr: f64) -> Self {
        Self {
            actor: AdamState::new(&nets.actor, AdamParams::with_lr(actor_lr)),
            critic: AdamState::new(&nets.critic, AdamParams::with_lr(critic_lr)),
            predictor: AdamState::new(&nets.predictor, AdamParams::with_lr(predictor_lr)),
        }
    }
}

fn finite_loss<T: Scalar>(loss: T, what: &'static str) -> Result<T> {
    if loss.is_finite() {
        Ok(loss)
    } else {
        Err(Error::NonFinite(what))
    }
}

/// One critic step towards the precomputed (stop-gradient) targets.
pub fn critic_update<T: Scalar>(
    critic: &mut Mlp<T>,
    opt: &mut AdamState<T>,
    inputs: &[Vec<T>],
    targets: &[T],
) -> Result<T> {
    let (loss, grads) = regression_loss(critic, inputs, targets)?;
    finite_loss(loss, "critic loss")?;
    opt.step(critic, &grads)?;
    Ok(loss)
}

/// One actor step with the critic held fixed.
pub fn actor_update<T: Scalar>(
    actor: &mut Mlp<T>,
    critic: &Mlp<T>,
    opt: &mut AdamState<T>,
    states: &[Vec<T>],
    noise: &[[T; N_ACTIONS]],
    tau: T,
) -> Result<T> {
    let (loss, grads) = actor_loss(actor, critic, states, noise, tau)?;
    finite_loss(loss, "actor loss")?;
    opt.step(actor, &grads)?;
    Ok(loss)
}

/// One reward-model step on `(s, a) -> r`.
pub fn predictive_update<T: Scalar>(
    predictor: &mut Mlp<T>,
    opt: &mut AdamState<T>,
    inputs: &[Vec<T>],
    rewards: &[T],
) -> Result<T> {
    let (loss, grads) = regression_loss(predictor, inputs, rewards)?;
    finite_loss(loss, "predictive loss")?;
    opt.step(predictor, &grads)?;
    Ok(loss)
}
