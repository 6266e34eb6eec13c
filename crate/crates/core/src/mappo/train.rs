use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use super::checkpoint::Checkpoint;
use super::config::TrainConfig;
use super::gae::{compute_gae, normalize_advantages};
use super::ppo::{ppo_update, AgentSamples, LossStats, Optimizers};
use super::rollout::{collect_rollout, EnvWorker, RolloutBuffer};
use super::{BaselineVariant, PolicySet};
use crate::env::{derive_seed, EnvConfig, Outcome};
use crate::error::{Error, Result};
use crate::physics::NUM_AGENTS;

/// Version tag written as the first line of metrics files.
pub const METRICS_SCHEMA: &str = "tgrasp-metrics/1.0";

/// One line of the training log.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct MetricsRow {
    pub iteration: u64,
    pub env_steps: u64,
    /// Episodes that finished during this iteration's rollout.
    pub episodes: u64,
    pub mean_episode_reward: f64,
    pub success_rate: f64,
    pub mean_position_error: f64,
    pub reward_reach: f64,
    pub reward_grasp: f64,
    pub reward_grasp_team: f64,
    pub reward_lift: f64,
    pub reward_pos: f64,
    pub reward_ori: f64,
    pub policy_loss: f64,
    pub value_loss: f64,
    pub entropy: f64,
    pub approx_kl: f64,
    pub clip_fraction: f64,
}

/// Incremental trainer: call [`Trainer::iteration`] until finished.
pub struct Trainer {
    env_config: EnvConfig,
    cfg: TrainConfig,
    seed: u64,
    policy: PolicySet,
    optimizers: Vec<Optimizers>,
    workers: Vec<EnvWorker>,
    rng: ChaCha8Rng,
    iteration: u64,
    env_steps: u64,
    parallel: bool,
}

impl Trainer {
    pub fn new(
        env_config: EnvConfig,
        cfg: TrainConfig,
        variant: BaselineVariant,
        seed: u64,
        parallel: bool,
    ) -> Result<Self> {
        env_config.validate()?;
        cfg.validate()?;
        let mut init_rng = ChaCha8Rng::seed_from_u64(derive_seed(seed, 100));
        let policy = PolicySet::new(variant, &cfg, &mut init_rng)?;
        let optimizers = policy
            .actors
            .iter()
            .zip(&policy.critics)
            .map(|(a, c)| Optimizers::new(a, c))
            .collect();
        let workers = (0..cfg.num_envs as u64)
            .map(|i| EnvWorker::new(&env_config, &policy, derive_seed(seed, 200), i))
            .collect::<Result<_>>()?;
        Ok(Self {
            env_config,
            cfg,
            seed,
            policy,
            optimizers,
            workers,
            rng: ChaCha8Rng::seed_from_u64(derive_seed(seed, 300)),
            iteration: 0,
            env_steps: 0,
            parallel,
        })
    }

    pub fn policy(&self) -> &PolicySet {
        &self.policy
    }

    pub fn config(&self) -> &TrainConfig {
        &self.cfg
    }

    pub fn iterations_done(&self) -> u64 {
        self.iteration
    }

    pub fn env_steps(&self) -> u64 {
        self.env_steps
    }

    pub fn is_finished(&self) -> bool {
        self.iteration >= self.cfg.iterations()
    }

    pub fn checkpoint(&self) -> Checkpoint {
        let mut policy = self.policy.clone();
        policy.freeze_normalizers();
        Checkpoint {
            policy,
            env_config: self.env_config.clone(),
            train_config: self.cfg.clone(),
            seed: self.seed,
            iteration: self.iteration,
            env_steps: self.env_steps,
        }
    }

    /// Collect one rollout and run the PPO update on it.
    pub fn iteration(&mut self) -> Result<MetricsRow> {
        let buffer = collect_rollout(
            &mut self.workers,
            &self.policy,
            &self.cfg,
            self.cfg.rollout_length as usize,
            self.parallel,
        )?;
        let samples = self.samples(&buffer)?;
        let lr_scale = if self.cfg.lr_anneal {
            1.0 - self.iteration as f64 / self.cfg.iterations() as f64
        } else {
            1.0
        };
        let mut stats = LossStats::default();
        let slots = self.policy.actors.len();
        for (slot, s) in samples.iter().enumerate() {
            let st = ppo_update(
                &mut self.policy.actors[slot],
                &mut self.policy.critics[slot],
                &mut self.optimizers[slot],
                s,
                &self.cfg,
                lr_scale,
                &mut self.rng,
            )
            .map_err(|e| match e {
                Error::NonFinite(msg) => Error::NonFinite(format!(
                    "iteration {}: {msg}",
                    self.iteration + 1
                )),
                other => other,
            })?;
            stats.policy_loss += st.policy_loss / slots as f64;
            stats.value_loss += st.value_loss / slots as f64;
            stats.entropy += st.entropy / slots as f64;
            stats.approx_kl += st.approx_kl / slots as f64;
            stats.clip_fraction += st.clip_fraction / slots as f64;
        }
        for agent in 0..NUM_AGENTS {
            let rows = buffer
                .segments
                .iter()
                .flat_map(|s| s.raw_observations[agent].iter().map(|o| &o[..]));
            self.policy.normalizers[agent].update(rows);
        }
        self.iteration += 1;
        self.env_steps += buffer.num_steps() as u64;
        Ok(self.metrics(&buffer, &stats))
    }

    /// Advantages and returns per network slot.
    fn samples(&self, buffer: &RolloutBuffer) -> Result<Vec<AgentSamples>> {
        let mut per_slot = vec![AgentSamples::default(); self.policy.actors.len()];
        for agent in 0..NUM_AGENTS {
            let out = &mut per_slot[self.policy.slot(agent)];
            for seg in &buffer.segments {
                let tr = &seg.agents[agent];
                let (adv, ret) = compute_gae(
                    &tr.rewards,
                    &tr.values,
                    &tr.dones,
                    seg.bootstrap[agent],
                    self.cfg.gamma,
                    self.cfg.gae_lambda,
                )?;
                out.append(&AgentSamples {
                    actor_inputs: tr.actor_inputs.clone(),
                    critic_inputs: tr.critic_inputs.clone(),
                    actions: tr.actions.clone(),
                    log_probs: tr.log_probs.clone(),
                    advantages: adv,
                    returns: ret,
                });
            }
        }
        for s in &mut per_slot {
            normalize_advantages(&mut s.advantages);
        }
        Ok(per_slot)
    }

    fn metrics(&self, buffer: &RolloutBuffer, stats: &LossStats) -> MetricsRow {
        let episodes: Vec<_> = buffer.episodes().collect();
        let n = episodes.len() as f64;
        let mean = |f: &dyn Fn(&super::rollout::EpisodeSummary) -> f64| {
            if episodes.is_empty() {
                f64::NAN
            } else {
                episodes.iter().map(|e| f(e)).sum::<f64>() / n
            }
        };
        let steps = buffer.num_steps().max(1) as f64;
        let mut terms = [0.0; 6];
        for seg in &buffer.segments {
            for (t, s) in terms.iter_mut().zip(&seg.term_sums) {
                *t += s / steps;
            }
        }
        MetricsRow {
            iteration: self.iteration,
            env_steps: self.env_steps,
            episodes: episodes.len() as u64,
            mean_episode_reward: mean(&|e| e.mean_return),
            success_rate: mean(&|e| f64::from(u8::from(e.outcome == Outcome::Success))),
            mean_position_error: mean(&|e| e.final_position_error),
            reward_reach: terms[0],
            reward_grasp: terms[1],
            reward_grasp_team: terms[2],
            reward_lift: terms[3],
            reward_pos: terms[4],
            reward_ori: terms[5],
            policy_loss: stats.policy_loss,
            value_loss: stats.value_loss,
            entropy: stats.entropy,
            approx_kl: stats.approx_kl,
            clip_fraction: stats.clip_fraction,
        }
    }
}

/// Train to completion. `on_iteration` sees every metrics row together with
/// the trainer, e.g. to write periodic checkpoints.
pub fn train(
    env_config: EnvConfig,
    cfg: TrainConfig,
    variant: BaselineVariant,
    seed: u64,
    parallel: bool,
    mut on_iteration: impl FnMut(&MetricsRow, &Trainer) -> Result<()>,
) -> Result<(Vec<MetricsRow>, Checkpoint)> {
    let mut trainer = Trainer::new(env_config, cfg, variant, seed, parallel)?;
    let mut rows = Vec::new();
    while !trainer.is_finished() {
        let row = trainer.iteration()?;
        on_iteration(&row, &trainer)?;
        rows.push(row);
    }
    Ok((rows, trainer.checkpoint()))
}
