use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct TrainConfig {
    pub gamma: f64,
    pub gae_lambda: f64,
    pub clip_epsilon: f64,
    pub epochs: u32,
    pub minibatches: u32,
    pub actor_lr: f64,
    pub critic_lr: f64,
    pub entropy_coef: f64,
    pub value_coef: f64,
    /// Steps per environment per iteration.
    pub rollout_length: u32,
    pub num_envs: u32,
    /// Environment steps (summed over environments) before training stops.
    pub total_env_steps: u64,
    pub max_grad_norm: f64,
    pub actor_hidden: Vec<usize>,
    pub critic_hidden: Vec<usize>,
    pub init_log_std: f64,
    /// Rewards are multiplied by this before advantage estimation.
    pub reward_scale: f64,
    /// Linearly decay both learning rates to zero over the run.
    pub lr_anneal: bool,
    /// One actor and one critic shared by both agents.
    pub share_weights: bool,
    /// Append the rod's ground-truth velocities to the critic input.
    pub critic_ground_truth: bool,
    /// Write a checkpoint every this many iterations (0 = only the final one).
    pub checkpoint_every: u32,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            gamma: 0.99,
            gae_lambda: 0.95,
            clip_epsilon: 0.2,
            epochs: 4,
            minibatches: 8,
            actor_lr: 3e-4,
            critic_lr: 3e-4,
            entropy_coef: 0.01,
            value_coef: 0.5,
            rollout_length: 256,
            num_envs: 16,
            total_env_steps: 2_000_000,
            max_grad_norm: 0.5,
            actor_hidden: vec![64, 64],
            critic_hidden: vec![128, 128],
            init_log_std: -0.5,
            reward_scale: 0.01,
            lr_anneal: false,
            share_weights: false,
            critic_ground_truth: false,
            checkpoint_every: 0,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        let unit = |key: &str, v: f64| {
            if v > 0.0 && v <= 1.0 {
                Ok(())
            } else {
                Err(Error::config(format!("train.{key} must be in (0, 1], got {v}")))
            }
        };
        unit("gamma", self.gamma)?;
        unit("gae_lambda", self.gae_lambda)?;
        for (key, v) in [
            ("clip_epsilon", self.clip_epsilon),
            ("actor_lr", self.actor_lr),
            ("critic_lr", self.critic_lr),
            ("max_grad_norm", self.max_grad_norm),
            ("reward_scale", self.reward_scale),
        ] {
            if !(v.is_finite() && v > 0.0) {
                return Err(Error::config(format!("train.{key} must be > 0, got {v}")));
            }
        }
        for (key, v) in [
            ("entropy_coef", self.entropy_coef),
            ("value_coef", self.value_coef),
        ] {
            if !(v.is_finite() && v >= 0.0) {
                return Err(Error::config(format!("train.{key} must be >= 0, got {v}")));
            }
        }
        if !self.init_log_std.is_finite() {
            return Err(Error::config("train.init_log_std must be finite"));
        }
        for (key, v) in [
            ("epochs", self.epochs),
            ("minibatches", self.minibatches),
            ("rollout_length", self.rollout_length),
            ("num_envs", self.num_envs),
        ] {
            if v == 0 {
                return Err(Error::config(format!("train.{key} must be >= 1")));
            }
        }
        if self.minibatches > self.rollout_length * self.num_envs {
            return Err(Error::config(
                "train.minibatches exceeds the number of samples per iteration",
            ));
        }
        if self.actor_hidden.contains(&0) || self.critic_hidden.contains(&0) {
            return Err(Error::config("train hidden layer widths must be >= 1"));
        }
        Ok(())
    }

    pub fn steps_per_iteration(&self) -> u64 {
        self.rollout_length as u64 * self.num_envs as u64
    }

    /// Number of iterations; a partial final iteration counts as a full one.
    pub fn iterations(&self) -> u64 {
        self.total_env_steps.div_ceil(self.steps_per_iteration()).max(1)
    }
}
