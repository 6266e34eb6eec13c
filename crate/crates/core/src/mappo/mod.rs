//! Multi-agent PPO with centralized critics and decentralized actors.
//!
//! Each agent owns an actor that sees only its local observation and a
//! critic whose input depends on the [`BaselineVariant`]; for
//! [`BaselineVariant::Ours`] the critic additionally receives both agents'
//! delta forces while the actors keep the ternary channels only.

mod checkpoint;
mod config;
mod eval;
mod gae;
mod ppo;
mod rollout;
mod train;
mod variant;

pub use checkpoint::{Checkpoint, CHECKPOINT_VERSION};
pub use config::TrainConfig;
pub use eval::{episode_seed, evaluate, run_episode, EpisodeRecord, EvalReport};
pub use gae::{compute_gae, normalize_advantages};
pub use ppo::{
    clip_grad_norm, clipped_surrogate, loss_and_grads, new_critic, ppo_update, Actor,
    AgentSamples, LossGrads, LossStats, Optimizers,
};
pub use rollout::{collect_rollout, AgentTrajectory, EnvWorker, EpisodeSummary, RolloutBuffer, Segment};
pub use train::{train, MetricsRow, Trainer, METRICS_SCHEMA};
pub use variant::{
    build_actor_input, build_critic_input, BaselineVariant, ObsNormalizer, FORCE_SCALE_N,
    GROUND_TRUTH_DIM,
};

use rand::Rng;

use crate::env::{AgentAction, AgentObservation, GraspEnv, TaskConfig, ACTION_DIM};
use crate::error::Result;
use crate::nn::Mlp;
use crate::physics::NUM_AGENTS;

/// Networks and observation statistics needed to act and to evaluate values.
#[derive(Clone, Debug, PartialEq)]
pub struct PolicySet {
    pub variant: BaselineVariant,
    /// One entry per agent, or a single shared entry.
    pub actors: Vec<Actor>,
    pub critics: Vec<Mlp>,
    pub normalizers: [ObsNormalizer; NUM_AGENTS],
    pub critic_ground_truth: bool,
}

impl PolicySet {
    pub fn new<R: Rng + ?Sized>(
        variant: BaselineVariant,
        cfg: &TrainConfig,
        rng: &mut R,
    ) -> Result<Self> {
        let copies = if cfg.share_weights { 1 } else { NUM_AGENTS };
        let mut actors = Vec::with_capacity(copies);
        let mut critics = Vec::with_capacity(copies);
        for _ in 0..copies {
            actors.push(Actor::new(
                variant.actor_input_dim(),
                &cfg.actor_hidden,
                ACTION_DIM,
                cfg.init_log_std,
                rng,
            )?);
            critics.push(new_critic(
                variant.critic_input_dim(cfg.critic_ground_truth),
                &cfg.critic_hidden,
                rng,
            )?);
        }
        Ok(Self {
            variant,
            actors,
            critics,
            normalizers: Default::default(),
            critic_ground_truth: cfg.critic_ground_truth,
        })
    }

    pub fn shared(&self) -> bool {
        self.actors.len() == 1
    }

    /// Index of the network pair used by `agent`.
    pub fn slot(&self, agent: usize) -> usize {
        agent.min(self.actors.len() - 1)
    }

    pub fn actor(&self, agent: usize) -> &Actor {
        &self.actors[self.slot(agent)]
    }

    pub fn critic(&self, agent: usize) -> &Mlp {
        &self.critics[self.slot(agent)]
    }

    pub fn actor_input(&self, agent: usize, obs: &AgentObservation) -> Result<Vec<f64>> {
        build_actor_input(obs, self.variant, &self.normalizers[agent])
    }

    /// Critic input for the environment's current state.
    pub fn critic_input(&self, env: &GraspEnv, observations: &[AgentObservation]) -> Result<Vec<f64>> {
        let rod = &env.state().rod;
        let gt = [
            rod.linear_velocity.x,
            rod.linear_velocity.z,
            rod.angular_velocity,
        ];
        build_critic_input(
            observations,
            Some(&env.forces().delta),
            self.critic_ground_truth.then_some(&gt),
            self.variant,
            &self.normalizers,
        )
    }

    pub fn value(&self, agent: usize, critic_input: &[f64]) -> Result<f64> {
        Ok(self.critic(agent).predict(critic_input)?[0])
    }

    /// Deterministic action of every agent (policy mean).
    pub fn act_deterministic(
        &self,
        observations: &[AgentObservation; NUM_AGENTS],
        task: &TaskConfig,
    ) -> Result<[AgentAction; NUM_AGENTS]> {
        let mut out = [AgentAction::default(); NUM_AGENTS];
        for (agent, a) in out.iter_mut().enumerate() {
            let x = self.actor_input(agent, &observations[agent])?;
            let mean = self.actor(agent).mean(&x)?;
            *a = AgentAction::from_policy_output(&mean, task);
        }
        Ok(out)
    }

    pub fn freeze_normalizers(&mut self) {
        for n in &mut self.normalizers {
            n.frozen = true;
        }
    }
}
