use rand::seq::SliceRandom;
use rand::Rng;

use super::config::TrainConfig;
use crate::error::{Error, Result};
use crate::nn::{round_to_f32, Adam, DiagGaussian, Mlp, Tensor2};

/// Policy network plus its state-independent Gaussian head.
#[derive(Clone, Debug, PartialEq)]
pub struct Actor {
    pub net: Mlp,
    pub head: DiagGaussian,
}

impl Actor {
    pub fn new<R: Rng + ?Sized>(
        input_dim: usize,
        hidden: &[usize],
        action_dim: usize,
        init_log_std: f64,
        rng: &mut R,
    ) -> Result<Self> {
        let sizes = layer_sizes(input_dim, hidden, action_dim);
        let mut head = DiagGaussian::new(action_dim, init_log_std);
        round_to_f32(&mut head.log_std);
        Ok(Self {
            net: Mlp::new(&sizes, 0.01, rng)?,
            head,
        })
    }

    pub fn mean(&self, input: &[f64]) -> Result<Vec<f64>> {
        self.net.predict(input)
    }

    pub fn num_params(&self) -> usize {
        self.net.num_params() + self.head.dim()
    }
}

pub fn new_critic<R: Rng + ?Sized>(input_dim: usize, hidden: &[usize], rng: &mut R) -> Result<Mlp> {
    Mlp::new(&layer_sizes(input_dim, hidden, 1), 1.0, rng)
}

fn layer_sizes(input: usize, hidden: &[usize], output: usize) -> Vec<usize> {
    let mut sizes = vec![input];
    sizes.extend_from_slice(hidden);
    sizes.push(output);
    sizes
}

/// Training samples of one agent (or of both, when weights are shared).
#[derive(Clone, Debug, Default)]
pub struct AgentSamples {
    pub actor_inputs: Vec<f64>,
    pub critic_inputs: Vec<f64>,
    pub actions: Vec<f64>,
    pub log_probs: Vec<f64>,
    pub advantages: Vec<f64>,
    pub returns: Vec<f64>,
}

impl AgentSamples {
    pub fn len(&self) -> usize {
        self.log_probs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.log_probs.is_empty()
    }

    pub fn append(&mut self, other: &AgentSamples) {
        self.actor_inputs.extend_from_slice(&other.actor_inputs);
        self.critic_inputs.extend_from_slice(&other.critic_inputs);
        self.actions.extend_from_slice(&other.actions);
        self.log_probs.extend_from_slice(&other.log_probs);
        self.advantages.extend_from_slice(&other.advantages);
        self.returns.extend_from_slice(&other.returns);
    }

    /// Copy the rows listed in `idx` into a new sample set.
    pub fn gather(&self, idx: &[usize], actor_dim: usize, critic_dim: usize, action_dim: usize) -> Self {
        let mut out = AgentSamples::default();
        for &i in idx {
            out.actor_inputs
                .extend_from_slice(&self.actor_inputs[i * actor_dim..(i + 1) * actor_dim]);
            out.critic_inputs
                .extend_from_slice(&self.critic_inputs[i * critic_dim..(i + 1) * critic_dim]);
            out.actions
                .extend_from_slice(&self.actions[i * action_dim..(i + 1) * action_dim]);
            out.log_probs.push(self.log_probs[i]);
            out.advantages.push(self.advantages[i]);
            out.returns.push(self.returns[i]);
        }
        out
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct LossStats {
    pub policy_loss: f64,
    pub value_loss: f64,
    pub entropy: f64,
    pub approx_kl: f64,
    pub clip_fraction: f64,
    pub total_loss: f64,
}

impl LossStats {
    fn accumulate(&mut self, other: &LossStats, weight: f64) {
        self.policy_loss += weight * other.policy_loss;
        self.value_loss += weight * other.value_loss;
        self.entropy += weight * other.entropy;
        self.approx_kl += weight * other.approx_kl;
        self.clip_fraction += weight * other.clip_fraction;
        self.total_loss += weight * other.total_loss;
    }
}

/// Gradients of the total minibatch loss.
#[derive(Clone, Debug, PartialEq)]
pub struct LossGrads {
    pub actor: Vec<f64>,
    pub log_std: Vec<f64>,
    pub critic: Vec<f64>,
}

/// `min(ρA, clip(ρ, 1-ε, 1+ε)A)`.
pub fn clipped_surrogate(ratio: f64, advantage: f64, epsilon: f64) -> f64 {
    let unclipped = ratio * advantage;
    let clipped = ratio.clamp(1.0 - epsilon, 1.0 + epsilon) * advantage;
    unclipped.min(clipped)
}

/// Total loss `policy - c_ent * entropy + c_v * MSE(value, return)` on a
/// minibatch, with its exact gradients.
pub fn loss_and_grads(
    actor: &Actor,
    critic: &Mlp,
    batch: &AgentSamples,
    cfg: &TrainConfig,
) -> Result<(LossStats, LossGrads)> {
    let n = batch.len();
    if n == 0 {
        return Err(Error::shape("empty minibatch"));
    }
    let a_dim = actor.head.dim();
    let x = Tensor2::new(n, actor.net.input_dim(), batch.actor_inputs.clone())?;
    let (means, actor_cache) = actor.net.forward(&x)?;
    let mut g_mean = Tensor2::zeros(n, a_dim);
    let mut g_log_std = vec![0.0; a_dim];
    let eps = cfg.clip_epsilon;
    let mut stats = LossStats::default();
    for i in 0..n {
        let mean = means.row(i);
        let action = &batch.actions[i * a_dim..(i + 1) * a_dim];
        let logp = actor.head.log_prob(mean, action);
        let log_ratio = logp - batch.log_probs[i];
        let ratio = log_ratio.exp();
        let adv = batch.advantages[i];
        let surrogate = clipped_surrogate(ratio, adv, eps);
        stats.policy_loss -= surrogate / n as f64;
        stats.approx_kl += ((ratio - 1.0) - log_ratio) / n as f64;
        if (ratio - 1.0).abs() > eps {
            stats.clip_fraction += 1.0 / n as f64;
        }
        // d surrogate / d logp: ρA when the unclipped branch is active.
        let unclipped_active = ratio * adv <= ratio.clamp(1.0 - eps, 1.0 + eps) * adv;
        if unclipped_active {
            let d_logp = -ratio * adv / n as f64;
            let (gm, gs) = actor.head.log_prob_grad(mean, action);
            for (o, g) in g_mean.row_mut(i).iter_mut().zip(&gm) {
                *o = d_logp * g;
            }
            for (o, g) in g_log_std.iter_mut().zip(&gs) {
                *o += d_logp * g;
            }
        }
    }
    stats.entropy = actor.head.entropy();
    for (o, g) in g_log_std.iter_mut().zip(actor.head.entropy_grad()) {
        *o -= cfg.entropy_coef * g;
    }
    let (g_actor, _) = actor.net.backward(&actor_cache, &g_mean)?;

    let c = Tensor2::new(n, critic.input_dim(), batch.critic_inputs.clone())?;
    let (values, critic_cache) = critic.forward(&c)?;
    let mut g_value = Tensor2::zeros(n, 1);
    for i in 0..n {
        let err = values.get(i, 0) - batch.returns[i];
        stats.value_loss += err * err / n as f64;
        g_value.data_mut()[i] = cfg.value_coef * 2.0 * err / n as f64;
    }
    let (g_critic, _) = critic.backward(&critic_cache, &g_value)?;
    stats.total_loss =
        stats.policy_loss - cfg.entropy_coef * stats.entropy + cfg.value_coef * stats.value_loss;
    Ok((
        stats,
        LossGrads {
            actor: g_actor,
            log_std: g_log_std,
            critic: g_critic,
        },
    ))
}

/// Scale `grads` jointly so their L2 norm is at most `max_norm`; returns the
/// norm before clipping.
pub fn clip_grad_norm(grads: &mut [&mut [f64]], max_norm: f64) -> f64 {
    let norm = grads
        .iter()
        .flat_map(|g| g.iter())
        .map(|v| v * v)
        .sum::<f64>()
        .sqrt();
    if norm > max_norm {
        let k = max_norm / norm;
        for g in grads.iter_mut() {
            g.iter_mut().for_each(|v| *v *= k);
        }
    }
    norm
}

/// Adam state of one actor/critic pair.
#[derive(Clone, Debug, PartialEq)]
pub struct Optimizers {
    pub actor: Adam,
    pub critic: Adam,
}

impl Optimizers {
    pub fn new(actor: &Actor, critic: &Mlp) -> Self {
        Self {
            actor: Adam::new(actor.num_params()),
            critic: Adam::new(critic.num_params()),
        }
    }
}

/// PPO epochs over `samples` (advantages already normalized). Returns the
/// loss statistics averaged over all minibatch steps.
pub fn ppo_update<R: Rng + ?Sized>(
    actor: &mut Actor,
    critic: &mut Mlp,
    opt: &mut Optimizers,
    samples: &AgentSamples,
    cfg: &TrainConfig,
    lr_scale: f64,
    rng: &mut R,
) -> Result<LossStats> {
    let n = samples.len();
    if n == 0 {
        return Err(Error::shape("no samples for the update"));
    }
    let actor_dim = actor.net.input_dim();
    let critic_dim = critic.input_dim();
    let action_dim = actor.head.dim();
    let minibatches = (cfg.minibatches as usize).min(n);
    let mut order: Vec<usize> = (0..n).collect();
    let mut total = LossStats::default();
    let steps = cfg.epochs as usize * minibatches;
    for _ in 0..cfg.epochs {
        order.shuffle(rng);
        for mb in 0..minibatches {
            let lo = mb * n / minibatches;
            let hi = (mb + 1) * n / minibatches;
            let batch = samples.gather(&order[lo..hi], actor_dim, critic_dim, action_dim);
            let (stats, mut grads) = loss_and_grads(actor, critic, &batch, cfg)?;
            if !stats.total_loss.is_finite() {
                return Err(Error::NonFinite(format!(
                    "non-finite loss (policy {}, value {})",
                    stats.policy_loss, stats.value_loss
                )));
            }
            total.accumulate(&stats, 1.0 / steps as f64);
            clip_grad_norm(&mut [&mut grads.actor, &mut grads.log_std], cfg.max_grad_norm);
            clip_grad_norm(&mut [&mut grads.critic], cfg.max_grad_norm);

            let n_net = actor.net.num_params();
            let mut actor_params = Vec::with_capacity(actor.num_params());
            actor_params.extend_from_slice(actor.net.params());
            actor_params.extend_from_slice(&actor.head.log_std);
            let mut actor_grads = grads.actor;
            actor_grads.extend_from_slice(&grads.log_std);
            opt.actor.update(&mut actor_params, &actor_grads, cfg.actor_lr * lr_scale)?;
            round_to_f32(&mut actor_params);
            actor.net.params_mut().copy_from_slice(&actor_params[..n_net]);
            actor.head.log_std.copy_from_slice(&actor_params[n_net..]);

            opt.critic.update(
                critic.params_mut(),
                &grads.critic,
                cfg.critic_lr * lr_scale,
            )?;
            round_to_f32(critic.params_mut());
        }
    }
    let finite = actor
        .net
        .params()
        .iter()
        .chain(&actor.head.log_std)
        .chain(critic.params())
        .all(|v| v.is_finite());
    if !finite {
        return Err(Error::NonFinite("non-finite network parameters".into()));
    }
    Ok(total)
}
