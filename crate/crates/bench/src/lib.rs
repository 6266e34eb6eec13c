//! Fixtures shared by the hot-path benchmarks.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use tgrasp_core::physics::{grasp_point, world_reset, world_step, AgentControl, WorldConfig, WorldState};
use tgrasp_core::sensing::{DeltaForce, FORCE_DIM};
use tgrasp_core::Vec2;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Controls that drive both grippers onto their grasp points and pinch.
pub fn grasp_controls(state: &WorldState, config: &WorldConfig) -> [AgentControl; 2] {
    std::array::from_fn(|agent| {
        let e = grasp_point(&state.rod, config, agent) - state.grippers[agent].position;
        AgentControl {
            velocity: Vec2::new((e.x * 10.0).clamp(-0.5, 0.5), (e.z * 10.0).clamp(-0.5, 0.5)),
            pinch: 10.0,
        }
    })
}

/// A world state with both grippers pinching the rod, so steps resolve
/// finger and support contacts.
pub fn grasped_state(config: &WorldConfig) -> WorldState {
    let mut state = world_reset(config, 1).expect("valid config");
    for _ in 0..80 {
        let c = grasp_controls(&state, config);
        state = world_step(&state, &c, config).expect("finite step");
    }
    state
}

pub fn random_deltas(n: usize, seed: u64) -> Vec<DeltaForce> {
    let mut rng = rng(seed);
    (0..n)
        .map(|_| {
            let mut d = DeltaForce::default();
            for agent in &mut d.values {
                for v in agent.iter_mut().take(FORCE_DIM) {
                    *v = rng.random_range(-1.0..1.0);
                }
            }
            d
        })
        .collect()
}

pub fn random_vec(n: usize, seed: u64) -> Vec<f64> {
    let mut rng = rng(seed);
    (0..n).map(|_| rng.random_range(-1.0..1.0)).collect()
}
