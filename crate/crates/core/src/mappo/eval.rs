use rayon::prelude::*;
use serde::Serialize;

use super::PolicySet;
use crate::env::{
    apply_variation, derive_seed, EnvConfig, GraspEnv, Outcome, StepResult, Variation,
};
use crate::error::Result;
use crate::physics::NUM_AGENTS;

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct EpisodeRecord {
    pub index: u64,
    pub seed: u64,
    pub outcome: Outcome,
    pub steps: u32,
    /// Rod-to-target distance when the episode ended.
    pub final_position_error: f64,
    /// Undiscounted return averaged over agents.
    pub mean_return: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct EvalReport {
    pub n_episodes: usize,
    pub success_rate: f64,
    pub position_error_mean: f64,
    /// Sample variance (n - 1 denominator); 0 for fewer than two episodes.
    pub position_error_variance: f64,
    pub episodes: Vec<EpisodeRecord>,
}

impl EvalReport {
    pub fn from_episodes(episodes: Vec<EpisodeRecord>) -> Self {
        let n = episodes.len();
        if n == 0 {
            return Self {
                n_episodes: 0,
                success_rate: 0.0,
                position_error_mean: 0.0,
                position_error_variance: 0.0,
                episodes,
            };
        }
        let successes = episodes
            .iter()
            .filter(|e| e.outcome == Outcome::Success)
            .count();
        let mean = episodes.iter().map(|e| e.final_position_error).sum::<f64>() / n as f64;
        let variance = if n > 1 {
            episodes
                .iter()
                .map(|e| (e.final_position_error - mean).powi(2))
                .sum::<f64>()
                / (n - 1) as f64
        } else {
            0.0
        };
        Self {
            n_episodes: n,
            success_rate: successes as f64 / n as f64,
            position_error_mean: mean,
            position_error_variance: variance,
            episodes,
        }
    }
}

/// Run one deterministic episode, calling `observer` after every step.
pub fn run_episode(
    policy: &PolicySet,
    env: &mut GraspEnv,
    seed: u64,
    mut observer: impl FnMut(&GraspEnv, &StepResult),
) -> Result<EpisodeRecord> {
    let (mut obs, _) = env.reset(seed)?;
    let task = env.config().task.clone();
    let mut ret = 0.0;
    loop {
        let actions = policy.act_deterministic(&obs, &task)?;
        let result = env.step(&actions)?;
        ret += result.rewards.iter().map(|r| r.total).sum::<f64>() / NUM_AGENTS as f64;
        observer(env, &result);
        if result.done {
            return Ok(EpisodeRecord {
                index: 0,
                seed,
                outcome: result.outcome,
                steps: env.t(),
                final_position_error: result.position_error,
                mean_return: ret,
            });
        }
        obs = result.observations;
    }
}

/// Seed of evaluation episode `index`.
pub fn episode_seed(seed: u64, index: u64) -> u64 {
    derive_seed(seed, 1_000_000 + index)
}

/// Evaluate `policy` with mean actions on `n_episodes` seeded episodes of the
/// varied environment.
pub fn evaluate(
    policy: &PolicySet,
    env_config: &EnvConfig,
    variations: &[Variation],
    n_episodes: usize,
    seed: u64,
    parallel: bool,
) -> Result<EvalReport> {
    let config = apply_variation(env_config, variations)?;
    let template = GraspEnv::new(config, policy.variant.actor_force())?;
    let run = |i: usize| {
        let mut env = template.clone();
        let mut rec = run_episode(policy, &mut env, episode_seed(seed, i as u64), |_, _| {})?;
        rec.index = i as u64;
        Ok(rec)
    };
    let episodes: Vec<Result<EpisodeRecord>> = if parallel {
        (0..n_episodes).into_par_iter().map(run).collect()
    } else {
        (0..n_episodes).map(run).collect()
    };
    Ok(EvalReport::from_episodes(
        episodes.into_iter().collect::<Result<_>>()?,
    ))
}
