use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use tgrasp_core::env::{EnvConfig, GraspEnv, Variation};
use tgrasp_core::mappo::*;
use tgrasp_core::nn::Mlp;
use tgrasp_core::Error;

/// O(T²) definition: A_t = Σ_k (γλ)^k δ_{t+k}, truncated at the first done.
fn gae_brute_force(
    rewards: &[f64],
    values: &[f64],
    dones: &[bool],
    bootstrap: f64,
    gamma: f64,
    lambda: f64,
) -> Vec<f64> {
    let n = rewards.len();
    let next_value = |t: usize| if t + 1 < n { values[t + 1] } else { bootstrap };
    let delta = |t: usize| {
        let live = if dones[t] { 0.0 } else { 1.0 };
        rewards[t] + gamma * next_value(t) * live - values[t]
    };
    (0..n)
        .map(|t| {
            let mut sum = 0.0;
            let mut weight = 1.0;
            for k in t..n {
                sum += weight * delta(k);
                if dones[k] {
                    break;
                }
                weight *= gamma * lambda;
            }
            sum
        })
        .collect()
}

#[test]
fn gae_matches_brute_force() {
    let mut rng = ChaCha8Rng::seed_from_u64(31);
    for _ in 0..100 {
        let n = rng.random_range(1..=32);
        let rewards: Vec<f64> = (0..n).map(|_| rng.random_range(-2.0..2.0)).collect();
        let values: Vec<f64> = (0..n).map(|_| rng.random_range(-2.0..2.0)).collect();
        let dones: Vec<bool> = (0..n).map(|_| rng.random_bool(0.1)).collect();
        let bootstrap = rng.random_range(-2.0..2.0);
        let gamma = rng.random_range(0.8..=1.0);
        let lambda = rng.random_range(0.0..=1.0);
        let (adv, ret) = compute_gae(&rewards, &values, &dones, bootstrap, gamma, lambda).unwrap();
        let oracle = gae_brute_force(&rewards, &values, &dones, bootstrap, gamma, lambda);
        for t in 0..n {
            assert!((adv[t] - oracle[t]).abs() <= 1e-10, "t {t}: {} vs {}", adv[t], oracle[t]);
            assert!((ret[t] - (oracle[t] + values[t])).abs() <= 1e-10);
        }
    }
}

fn random_samples(
    actor: &Actor,
    critic_dim: usize,
    n: usize,
    perturb: f64,
    rng: &mut ChaCha8Rng,
) -> AgentSamples {
    let mut s = AgentSamples::default();
    let d = actor.net.input_dim();
    for _ in 0..n {
        let x: Vec<f64> = (0..d).map(|_| rng.random_range(-1.0..1.0)).collect();
        let mean = actor.mean(&x).unwrap();
        let a = actor.head.sample(&mean, rng);
        // Old log-probs away from the current policy so some ratios clip.
        s.log_probs
            .push(actor.head.log_prob(&mean, &a) + rng.random_range(-perturb..perturb));
        s.actor_inputs.extend(x);
        s.actions.extend(a);
        s.critic_inputs
            .extend((0..critic_dim).map(|_| rng.random_range(-1.0..1.0)));
        s.advantages.push(rng.random_range(-1.5..1.5));
        s.returns.push(rng.random_range(-1.0..1.0));
    }
    s
}

fn total_loss(actor: &Actor, critic: &Mlp, s: &AgentSamples, cfg: &TrainConfig) -> f64 {
    loss_and_grads(actor, critic, s, cfg).unwrap().0.total_loss
}

fn close(fd: f64, an: f64, tol: f64) -> bool {
    (fd - an).abs() <= 1e-8 || (fd - an).abs() / fd.abs().max(an.abs()) <= tol
}

#[test]
fn total_loss_gradient_matches_finite_differences() {
    let mut rng = ChaCha8Rng::seed_from_u64(77);
    let cfg = TrainConfig::default();
    let h = 1e-6;
    for case in 0..20 {
        let in_dim = rng.random_range(2..=6);
        let critic_dim = rng.random_range(2..=8);
        let hidden = vec![rng.random_range(2..=8)];
        let mut actor = Actor::new(in_dim, &hidden, 2, rng.random_range(-1.0..0.5), &mut rng).unwrap();
        // Non-trivial means so the policy term has real gradients.
        for p in actor.net.params_mut() {
            *p *= 30.0;
        }
        let mut critic = new_critic(critic_dim, &hidden, &mut rng).unwrap();
        let samples = random_samples(&actor, critic_dim, 6, 0.15, &mut rng);
        let (_, grads) = loss_and_grads(&actor, &critic, &samples, &cfg).unwrap();
        for i in 0..actor.net.num_params() {
            let orig = actor.net.params()[i];
            actor.net.params_mut()[i] = orig + h;
            let lp = total_loss(&actor, &critic, &samples, &cfg);
            actor.net.params_mut()[i] = orig - h;
            let lm = total_loss(&actor, &critic, &samples, &cfg);
            actor.net.params_mut()[i] = orig;
            let fd = (lp - lm) / (2.0 * h);
            assert!(close(fd, grads.actor[i], 1e-4), "case {case} actor {i}: {fd} vs {}", grads.actor[i]);
        }
        for i in 0..actor.head.dim() {
            let orig = actor.head.log_std[i];
            actor.head.log_std[i] = orig + h;
            let lp = total_loss(&actor, &critic, &samples, &cfg);
            actor.head.log_std[i] = orig - h;
            let lm = total_loss(&actor, &critic, &samples, &cfg);
            actor.head.log_std[i] = orig;
            let fd = (lp - lm) / (2.0 * h);
            assert!(close(fd, grads.log_std[i], 1e-4), "case {case} log_std {i}");
        }
        for i in 0..critic.num_params() {
            let orig = critic.params()[i];
            critic.params_mut()[i] = orig + h;
            let lp = total_loss(&actor, &critic, &samples, &cfg);
            critic.params_mut()[i] = orig - h;
            let lm = total_loss(&actor, &critic, &samples, &cfg);
            critic.params_mut()[i] = orig;
            let fd = (lp - lm) / (2.0 * h);
            assert!(close(fd, grads.critic[i], 1e-4), "case {case} critic {i}");
        }
    }
}

proptest! {
    #[test]
    fn surrogate_never_exceeds_either_branch(
        ratio in 0.0f64..5.0,
        adv in -10.0f64..10.0,
        eps in 0.01f64..0.5,
    ) {
        let s = clipped_surrogate(ratio, adv, eps);
        let bound = (ratio * adv)
            .max((1.0 + eps) * adv)
            .max((1.0 - eps) * adv);
        prop_assert!(s <= bound + 1e-12);
        prop_assert!(s <= ratio * adv + 1e-12);
    }

    #[test]
    fn advantage_normalization_moments(values in prop::collection::vec(-100.0f64..100.0, 2..200)) {
        let mut v = values.clone();
        normalize_advantages(&mut v);
        let n = v.len() as f64;
        let mean = v.iter().sum::<f64>() / n;
        let std = (v.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / n).sqrt();
        prop_assert!(mean.abs() < 1e-6);
        let spread = values.iter().cloned().fold(f64::MIN, f64::max) - values.iter().cloned().fold(f64::MAX, f64::min);
        if spread > 1e-6 {
            prop_assert!((std - 1.0).abs() < 1e-6);
        }
    }
}

#[test]
fn clip_branch_uses_clipped_value() {
    let eps = 0.2;
    let adv = 1.5;
    assert!((clipped_surrogate(1.0 + 2.0 * eps, adv, eps) - (1.0 + eps) * adv).abs() < 1e-12);
}

/// One-step bandit: reward -(a - 0.5)^2 for a single action dimension.
#[test]
fn bandit_policy_improves() {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let cfg = TrainConfig {
        actor_lr: 3e-3,
        critic_lr: 3e-3,
        entropy_coef: 0.0,
        minibatches: 4,
        ..TrainConfig::default()
    };
    let mut actor = Actor::new(1, &[8], 1, 0.0, &mut rng).unwrap();
    let mut critic = new_critic(1, &[8], &mut rng).unwrap();
    let mut opt = Optimizers::new(&actor, &critic);
    let expected_reward = |actor: &Actor| {
        let mu = actor.mean(&[1.0]).unwrap()[0];
        let sigma = actor.head.log_std[0].exp();
        -((mu - 0.5).powi(2) + sigma * sigma)
    };
    let start = expected_reward(&actor);
    for _ in 0..100 {
        let mut s = AgentSamples::default();
        let mean = actor.mean(&[1.0]).unwrap();
        let mut rewards = Vec::new();
        for _ in 0..128 {
            let a = actor.head.sample(&mean, &mut rng);
            rewards.push(-(a[0] - 0.5).powi(2));
            s.log_probs.push(actor.head.log_prob(&mean, &a));
            s.actor_inputs.push(1.0);
            s.critic_inputs.push(1.0);
            s.actions.extend(a);
        }
        let (mut adv, ret) = compute_gae(
            &rewards,
            &vec![critic.predict(&[1.0]).unwrap()[0]; rewards.len()],
            &vec![true; rewards.len()],
            0.0,
            cfg.gamma,
            cfg.gae_lambda,
        )
        .unwrap();
        normalize_advantages(&mut adv);
        s.advantages = adv;
        s.returns = ret;
        ppo_update(&mut actor, &mut critic, &mut opt, &s, &cfg, 1.0, &mut rng).unwrap();
    }
    let end = expected_reward(&actor);
    assert!(end > start + 0.3, "expected reward {start} -> {end}");
}

fn tiny_config() -> TrainConfig {
    TrainConfig {
        rollout_length: 16,
        num_envs: 2,
        total_env_steps: 32,
        minibatches: 2,
        epochs: 2,
        actor_hidden: vec![16],
        critic_hidden: vec![16],
        ..TrainConfig::default()
    }
}

#[test]
fn rollout_shapes_and_determinism() {
    let cfg = TrainConfig {
        num_envs: 1,
        ..tiny_config()
    };
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let policy = PolicySet::new(BaselineVariant::Ours, &cfg, &mut rng).unwrap();
    let env = EnvConfig::default();
    let collect = |parallel| {
        let mut workers = vec![EnvWorker::new(&env, &policy, 9, 0).unwrap()];
        collect_rollout(&mut workers, &policy, &cfg, 5, parallel).unwrap()
    };
    let a = collect(false);
    assert_eq!(a.num_steps(), 5);
    assert_eq!(a.segments[0].agents[0].rewards.len(), 5);
    assert_eq!(a.segments[0].agents[1].critic_inputs.len(), 5 * 44);
    assert_eq!(a, collect(false));
    assert_eq!(a, collect(true));
}

#[test]
fn stored_log_probs_recompute() {
    let cfg = tiny_config();
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let policy = PolicySet::new(BaselineVariant::RawForce, &cfg, &mut rng).unwrap();
    let env = EnvConfig::default();
    let mut workers: Vec<_> = (0..2)
        .map(|i| EnvWorker::new(&env, &policy, 4, i).unwrap())
        .collect();
    let buf = collect_rollout(&mut workers, &policy, &cfg, 20, false).unwrap();
    for seg in &buf.segments {
        for (agent, tr) in seg.agents.iter().enumerate() {
            for t in 0..tr.log_probs.len() {
                let x = &tr.actor_inputs[t * 18..(t + 1) * 18];
                let a = &tr.actions[t * 3..(t + 1) * 3];
                let actor = policy.actor(agent);
                let lp = actor.head.log_prob(&actor.mean(x).unwrap(), a);
                assert!((lp - tr.log_probs[t]).abs() <= 1e-6);
            }
        }
    }
}

#[test]
fn actor_inputs_never_carry_delta_force() {
    for variant in BaselineVariant::ALL {
        assert_eq!(variant.actor_input_dim(), 18);
        let extra = variant.critic_input_dim(false) - 2 * variant.actor_input_dim();
        assert_eq!(extra, if variant == BaselineVariant::Ours { 8 } else { 0 });
    }
}

#[test]
fn training_is_deterministic_and_one_iteration_gives_one_row() {
    let cfg = tiny_config();
    let run = || {
        train(EnvConfig::default(), cfg.clone(), BaselineVariant::Ours, 3, false, |_, _| Ok(()))
            .unwrap()
    };
    let (rows_a, ck_a) = run();
    let (rows_b, ck_b) = run();
    assert_eq!(rows_a.len(), 1);
    assert_eq!(format!("{rows_a:?}"), format!("{rows_b:?}"));
    assert_eq!(ck_a.to_bytes().unwrap(), ck_b.to_bytes().unwrap());
}

#[test]
fn checkpoint_roundtrip_and_corruption() {
    let cfg = tiny_config();
    let (_, ck) = train(EnvConfig::default(), cfg, BaselineVariant::TernaryForce, 8, false, |_, _| Ok(())).unwrap();
    let bytes = ck.to_bytes().unwrap();
    let back = Checkpoint::from_bytes(&bytes).unwrap();
    assert_eq!(back, ck);

    let mut flipped = bytes.clone();
    let mid = flipped.len() / 2;
    flipped[mid] ^= 0x40;
    assert!(matches!(
        Checkpoint::from_bytes(&flipped),
        Err(Error::Integrity { ref field, .. }) if field == "checksum"
    ));
    let mut bad_version = bytes.clone();
    bad_version[4] = 9;
    match Checkpoint::from_bytes(&bad_version) {
        Err(Error::Integrity { field, expected, found }) => {
            assert_eq!(field, "format version");
            assert_eq!(expected, "1");
            assert_eq!(found, "9");
        }
        other => panic!("unexpected {other:?}"),
    }
    assert!(Checkpoint::from_bytes(&bytes[..10]).is_err());
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("ck.bin");
    ck.save(&path).unwrap();
    assert_eq!(Checkpoint::load(&path).unwrap(), ck);
}

#[test]
fn evaluation_is_deterministic() {
    let mut rng = ChaCha8Rng::seed_from_u64(6);
    let cfg = tiny_config();
    let policy = PolicySet::new(BaselineVariant::NoForce, &cfg, &mut rng).unwrap();
    let mut env = EnvConfig::default();
    env.task.horizon = 60;
    let a = evaluate(&policy, &env, &[], 3, 11, false).unwrap();
    let b = evaluate(&policy, &env, &[], 3, 11, true).unwrap();
    assert_eq!(a, b);
    assert_eq!(a.n_episodes, 3);
    let empty = evaluate(&policy, &env, &[Variation::ForceScale(2.0)], 0, 11, false).unwrap();
    assert_eq!(empty.n_episodes, 0);
    assert_eq!(empty.success_rate, 0.0);
}

#[test]
fn no_force_actor_sees_zero_force_channels() {
    let mut env = GraspEnv::new(EnvConfig::default(), BaselineVariant::NoForce.actor_force()).unwrap();
    let (obs, _) = env.reset(3).unwrap();
    let policy = PolicySet::new(BaselineVariant::NoForce, &tiny_config(), &mut ChaCha8Rng::seed_from_u64(0)).unwrap();
    let x = policy.actor_input(0, &obs[0]).unwrap();
    assert!(x[14..].iter().all(|&v| v == 0.0));
    assert!(matches!(
        PolicySet::new(BaselineVariant::Ours, &tiny_config(), &mut ChaCha8Rng::seed_from_u64(0))
            .unwrap()
            .actor_input(0, &obs[0]),
        Err(Error::Composition(_))
    ));
}
