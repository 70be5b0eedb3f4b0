//! Actor-critic learner with a reward model and Gumbel-Softmax exploration.

pub mod config;
pub mod networks;
pub mod policy;
pub mod replay;
pub mod train;

pub use config::{AnnealClock, Components, PredictedReward, TrainingConfig, Variant};
pub use networks::{
    actor_architecture, actor_loss, actor_update, critic_update, predictive_update, regression_loss,
    value_architecture, AgentNetworks, Optimizers, N_ACTIONS,
};
pub use policy::{
    anneal_temperature, argmax, compute_reward, gumbel_from_uniform, gumbel_softmax, relaxed_softmax,
    sample_gumbel, softmax_backward, AnnealSchedule,
};
pub use replay::{ReplayBuffer, Transition};
pub use train::{greedy_action, train, EpisodeSummary, RunMetrics, StepRecord, TrainedAgent};
