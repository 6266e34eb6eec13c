use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use super::config::TrainConfig;
use super::PolicySet;
use crate::env::{
    derive_seed, AgentAction, AgentObservation, EnvConfig, GraspEnv, Outcome, OBS_DIM,
};
use crate::error::Result;
use crate::physics::NUM_AGENTS;

/// Per-step series of one agent in one environment.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct AgentTrajectory {
    pub actor_inputs: Vec<f64>,
    pub critic_inputs: Vec<f64>,
    pub actions: Vec<f64>,
    pub log_probs: Vec<f64>,
    /// Scaled rewards, including the bootstrap added at truncations.
    pub rewards: Vec<f64>,
    pub values: Vec<f64>,
    pub dones: Vec<bool>,
}

/// Summary of an episode that finished during collection.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct EpisodeSummary {
    pub outcome: Outcome,
    pub length: u32,
    /// Unscaled return averaged over agents.
    pub mean_return: f64,
    pub final_position_error: f64,
}

/// Everything one environment produced in one rollout.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct Segment {
    pub agents: [AgentTrajectory; NUM_AGENTS],
    /// Value of the state reached after the last step, per agent.
    pub bootstrap: [f64; NUM_AGENTS],
    /// Unnormalized observations, for the running normalizer.
    pub raw_observations: [Vec<[f64; OBS_DIM]>; NUM_AGENTS],
    pub episodes: Vec<EpisodeSummary>,
    /// Per-step reward terms summed over steps, averaged over agents.
    pub term_sums: [f64; 6],
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct RolloutBuffer {
    pub rollout_length: usize,
    /// One segment per environment, in environment index order.
    pub segments: Vec<Segment>,
}

impl RolloutBuffer {
    pub fn num_envs(&self) -> usize {
        self.segments.len()
    }

    pub fn num_steps(&self) -> usize {
        self.segments.len() * self.rollout_length
    }

    pub fn episodes(&self) -> impl Iterator<Item = &EpisodeSummary> {
        self.segments.iter().flat_map(|s| s.episodes.iter())
    }
}

/// An environment plus the state carried between rollouts.
#[derive(Clone, Debug)]
pub struct EnvWorker {
    env: GraspEnv,
    index: u64,
    seed: u64,
    episodes_started: u64,
    rng: ChaCha8Rng,
    observations: [AgentObservation; NUM_AGENTS],
    episode_return: f64,
}

impl EnvWorker {
    pub fn new(config: &EnvConfig, policy: &PolicySet, seed: u64, index: u64) -> Result<Self> {
        let mut env = GraspEnv::new(config.clone(), policy.variant.actor_force())?;
        let (observations, _) = env.reset(derive_seed(derive_seed(seed, index), 0))?;
        Ok(Self {
            env,
            index,
            seed,
            episodes_started: 1,
            rng: ChaCha8Rng::seed_from_u64(derive_seed(seed ^ 0x5EED, index)),
            observations,
            episode_return: 0.0,
        })
    }

    pub fn env(&self) -> &GraspEnv {
        &self.env
    }

    fn next_episode_seed(&mut self) -> u64 {
        let s = derive_seed(derive_seed(self.seed, self.index), self.episodes_started);
        self.episodes_started += 1;
        s
    }

    /// Run `steps` steps with frozen `policy`, resetting on episode end.
    pub fn collect(&mut self, policy: &PolicySet, cfg: &TrainConfig, steps: usize) -> Result<Segment> {
        let mut seg = Segment::default();
        let task = self.env.config().task.clone();
        for _ in 0..steps {
            let obs = self.observations;
            let critic_in = policy.critic_input(&self.env, &obs)?;
            let mut actions = [AgentAction::default(); NUM_AGENTS];
            for agent in 0..NUM_AGENTS {
                let x = policy.actor_input(agent, &obs[agent])?;
                let actor = policy.actor(agent);
                let mean = actor.mean(&x)?;
                let a = actor.head.sample(&mean, &mut self.rng);
                let traj = &mut seg.agents[agent];
                traj.log_probs.push(actor.head.log_prob(&mean, &a));
                traj.values.push(policy.value(agent, &critic_in)?);
                traj.actor_inputs.extend_from_slice(&x);
                traj.critic_inputs.extend_from_slice(&critic_in);
                traj.actions.extend_from_slice(&a);
                actions[agent] = AgentAction::from_policy_output(&a, &task);
                seg.raw_observations[agent].push(obs[agent].values);
            }
            let result = self.env.step(&actions)?;
            // Success and timeout end the episode without ending the task's
            // value, so they bootstrap; a drop is a true terminal state.
            let truncated = result.done && result.outcome != Outcome::Dropped;
            let next_critic = if truncated {
                Some(policy.critic_input(&self.env, &result.observations)?)
            } else {
                None
            };
            let mut step_return = 0.0;
            for agent in 0..NUM_AGENTS {
                let r = &result.rewards[agent];
                step_return += r.total / NUM_AGENTS as f64;
                for (sum, term) in seg.term_sums.iter_mut().zip(r.terms()) {
                    *sum += term / NUM_AGENTS as f64;
                }
                let mut reward = r.total * cfg.reward_scale;
                if let Some(c) = &next_critic {
                    reward += cfg.gamma * policy.value(agent, c)?;
                }
                seg.agents[agent].rewards.push(reward);
                seg.agents[agent].dones.push(result.done);
            }
            self.episode_return += step_return;
            if result.done {
                seg.episodes.push(EpisodeSummary {
                    outcome: result.outcome,
                    length: self.env.t(),
                    mean_return: self.episode_return,
                    final_position_error: result.position_error,
                });
                self.episode_return = 0.0;
                let seed = self.next_episode_seed();
                self.observations = self.env.reset(seed)?.0;
            } else {
                self.observations = result.observations;
            }
        }
        let critic_in = policy.critic_input(&self.env, &self.observations)?;
        for agent in 0..NUM_AGENTS {
            seg.bootstrap[agent] = policy.value(agent, &critic_in)?;
        }
        Ok(seg)
    }
}

/// Collect `rollout_length` steps from every worker. Each worker has its own
/// random stream, so the parallel and sequential paths give identical buffers.
pub fn collect_rollout(
    workers: &mut [EnvWorker],
    policy: &PolicySet,
    cfg: &TrainConfig,
    rollout_length: usize,
    parallel: bool,
) -> Result<RolloutBuffer> {
    let segments: Vec<Result<Segment>> = if parallel {
        workers
            .par_iter_mut()
            .map(|w| w.collect(policy, cfg, rollout_length))
            .collect()
    } else {
        workers
            .iter_mut()
            .map(|w| w.collect(policy, cfg, rollout_length))
            .collect()
    };
    Ok(RolloutBuffer {
        rollout_length,
        segments: segments.into_iter().collect::<Result<_>>()?,
    })
}
