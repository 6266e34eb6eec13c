use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use tgrasp_core::physics::*;
use tgrasp_core::Vec2;

/// Grippers parked far from the rod, fingers open.
fn parked(state: &mut WorldState) {
    state.grippers[0].position = Vec2::new(-1.4, 1.9);
    state.grippers[1].position = Vec2::new(1.4, 1.9);
}

/// P-control both grippers onto their grasp points, pinch after step 30 and
/// add an upward speed `lift.2` for steps in `lift.0..lift.1`.
fn scripted(
    state: &WorldState,
    cfg: &WorldConfig,
    step: usize,
    pinch: f64,
    lift: (usize, usize, f64),
) -> [AgentControl; 2] {
    let mut c = [AgentControl::default(); 2];
    for (a, ctrl) in c.iter_mut().enumerate() {
        let e = grasp_point(&state.rod, cfg, a) - state.grippers[a].position;
        let mut v = e * 10.0;
        if step >= lift.0 && step < lift.1 {
            v.z += lift.2;
        }
        ctrl.velocity = Vec2::new(v.x.clamp(-0.5, 0.5), v.z.clamp(-0.5, 0.5));
        ctrl.pinch = if step > 30 { pinch } else { 0.0 };
    }
    c
}

fn run_grasp(cfg: &WorldConfig, pinch: f64, steps: usize) -> WorldState {
    let mut s = world_reset(cfg, 3).unwrap();
    for step in 0..steps {
        let c = scripted(&s, cfg, step, pinch, (100, 140, 0.25));
        s = world_step(&s, &c, cfg).unwrap();
    }
    s
}

#[test]
fn free_flight_matches_recurrence() {
    let cfg = WorldConfig::default();
    let mut s = world_reset(&cfg, 0).unwrap();
    parked(&mut s);
    s.rod.position = Vec2::new(0.1, 1.2);
    s.rod.linear_velocity = Vec2::new(0.3, 1.5);
    s.rod.angular_velocity = 0.7;
    let (x0, z0, vx, vz0, w) = (0.1, 1.2, 0.3, 1.5, 0.7);
    let h = cfg.substep();
    let g = cfg.gravity;
    let zero = [AgentControl::default(); 2];
    for k in 1..=40 {
        s = world_step(&s, &zero, &cfg).unwrap();
        assert!(s.contacts.is_empty());
        let n = (k * cfg.substeps as usize) as f64;
        let z = z0 + n * h * vz0 - g * h * h * n * (n + 1.0) / 2.0;
        let x = x0 + n * h * vx;
        let vz = vz0 - g * h * n;
        assert!((s.rod.position.z - z).abs() <= 1e-9, "step {k}: {} vs {z}", s.rod.position.z);
        assert!((s.rod.position.x - x).abs() <= 1e-9);
        assert!((s.rod.linear_velocity.z - vz).abs() <= 1e-9);
        assert!((s.rod.tilt - n * h * w).abs() <= 1e-9);
    }
}

#[test]
fn resting_rod_settles() {
    let cfg = WorldConfig::default();
    let mut s = world_reset(&cfg, 0).unwrap();
    parked(&mut s);
    let zero = [AgentControl::default(); 2];
    for _ in 0..300 {
        s = world_step(&s, &zero, &cfg).unwrap();
    }
    assert!(s.rod.linear_velocity.norm() < 1e-6, "{:?}", s.rod.linear_velocity);
    assert!(s.rod.angular_velocity.abs() < 1e-6);
    assert!(s.touches_support());
}

#[test]
fn resting_rod_is_passive() {
    let cfg = WorldConfig::default();
    let mut s = world_reset(&cfg, 0).unwrap();
    parked(&mut s);
    let zero = [AgentControl::default(); 2];
    let mut prev = rod_mechanical_energy(&s, &cfg);
    for step in 0..300 {
        s = world_step(&s, &zero, &cfg).unwrap();
        let e = rod_mechanical_energy(&s, &cfg);
        assert!(e <= prev + 1e-9, "energy rose at step {step}: {prev} -> {e}");
        prev = e;
    }
}

#[test]
fn static_grasp_supports_weight() {
    let cfg = WorldConfig::default();
    let s = run_grasp(&cfg, 10.0, 400);
    assert!(s.grippers.iter().all(|g| g.grasp_flag));
    assert!(!s.touches_support());
    let fz: f64 = finger_forces(&s).iter().flatten().map(|f| f.z).sum();
    let mg = cfg.rod_mass * cfg.gravity;
    assert!((fz - mg).abs() / mg < 0.02, "fz {fz} vs mg {mg}");
}

#[test]
fn grasp_flag_implies_firm_contact() {
    let cfg = WorldConfig::default();
    let mut s = world_reset(&cfg, 5).unwrap();
    for step in 0..250 {
        let c = scripted(&s, &cfg, step, 6.0, (100, 140, 0.25));
        s = world_step(&s, &c, &cfg).unwrap();
        let f = finger_sensor_forces(&s);
        for (a, g) in s.grippers.iter().enumerate() {
            assert!(g.aperture >= 0.0 && g.aperture <= cfg.aperture_max);
            if g.grasp_flag {
                assert!(f[a][1] >= cfg.grasp_force_min && f[a][3] >= cfg.grasp_force_min);
            }
        }
    }
}

fn mean_normal(s: &WorldState) -> f64 {
    let f = finger_sensor_forces(s);
    f.iter().map(|a| a[1] + a[3]).sum::<f64>() / 4.0
}

#[test]
fn force_scale_doubles_equilibrium_normal_force() {
    let base = WorldConfig::default();
    let doubled = WorldConfig {
        gripper_force_scale: 2.0,
        ..WorldConfig::default()
    };
    let n1 = mean_normal(&run_grasp(&base, 8.0, 400));
    let n2 = mean_normal(&run_grasp(&doubled, 8.0, 400));
    assert!((n2 / n1 - 2.0).abs() < 0.02, "{n1} {n2}");
}

#[test]
fn force_scale_is_monotone() {
    let mut last = 0.0;
    for scale in [0.25, 0.5, 1.0, 1.5, 2.0, 3.0] {
        let cfg = WorldConfig {
            gripper_force_scale: scale,
            ..WorldConfig::default()
        };
        let n = mean_normal(&run_grasp(&cfg, 6.0, 350));
        assert!(n >= last, "scale {scale}: {n} < {last}");
        last = n;
    }
}

#[test]
fn contact_cone_on_random_inputs() {
    let cfg = WorldConfig::default();
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    for _ in 0..10_000 {
        let pen = rng.random_range(0.0..0.02);
        let angle: f64 = rng.random_range(-std::f64::consts::PI..std::f64::consts::PI);
        let normal = Vec2::new(angle.cos(), angle.sin());
        let v = Vec2::new(rng.random_range(-3.0..3.0), rng.random_range(-3.0..3.0));
        let f = contact_force(pen, v, normal, &cfg);
        let fnorm = f.dot(normal);
        let ft = f.dot(normal.perp());
        assert!(fnorm >= 0.0);
        assert!(ft.abs() <= cfg.friction_mu * fnorm + 1e-12);
    }
}

#[test]
fn contact_cone_along_random_rollouts() {
    let cfg = WorldConfig::default();
    let mut rng = ChaCha8Rng::seed_from_u64(12);
    let mut checked = 0;
    for ep in 0..40 {
        let mut s = world_reset(&cfg, ep).unwrap();
        for step in 0..250 {
            let mut c = scripted(&s, &cfg, step, rng.random_range(0.0..20.0), (100, 200, 0.2));
            for ctrl in &mut c {
                ctrl.velocity += Vec2::new(rng.random_range(-0.3..0.3), rng.random_range(-0.3..0.3));
            }
            s = world_step(&s, &c, &cfg).unwrap();
            for cp in &s.contacts {
                assert!(cp.penetration > 0.0 || cp.force == Vec2::ZERO);
                assert!(cp.normal_force() >= 0.0);
                assert!(cp.tangential_force().abs() <= cfg.friction_mu * cp.normal_force() + 1e-12);
                checked += 1;
            }
        }
    }
    assert!(checked >= 10_000, "only {checked} contacts");
}

#[test]
fn step_is_pure() {
    let cfg = WorldConfig::default();
    let s = world_reset(&cfg, 9).unwrap();
    let c = scripted(&s, &cfg, 40, 10.0, (0, 0, 0.0));
    assert_eq!(world_step(&s, &c, &cfg).unwrap(), world_step(&s, &c, &cfg).unwrap());
}

#[test]
fn releasing_a_lifted_rod_drops_it() {
    let cfg = WorldConfig::default();
    let mut s = run_grasp(&cfg, 10.0, 300);
    assert!(!s.touches_support());
    // Open and withdraw sideways so the lower fingers leave the rod.
    let mut open = [AgentControl::default(); 2];
    open[0].velocity = Vec2::new(-0.5, 0.0);
    open[1].velocity = Vec2::new(0.5, 0.0);
    let mut landed = false;
    for _ in 0..200 {
        s = world_step(&s, &open, &cfg).unwrap();
        landed |= s.touches_support();
    }
    assert!(landed);
}

#[test]
fn sim_time_advances() {
    let cfg = WorldConfig::default();
    let mut s = world_reset(&cfg, 1).unwrap();
    let zero = [AgentControl::default(); 2];
    let mut t = s.sim_time;
    for _ in 0..20 {
        s = world_step(&s, &zero, &cfg).unwrap();
        assert!(s.sim_time > t);
        t = s.sim_time;
    }
}
